//! Run configuration: one JSON document with optional sections per
//! subcommand. Command-line flags override the top-level `seed` and `cap`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use orthogeo::amalgam::AmalgamSpec;
use orthogeo::fixtures;
use orthogeo::gf::{Field, Matrix};
use orthogeo::group::{GroupSpec, Perm};
use orthogeo::orthospace::{BilinearForm, Hall, Label, OrthGeometry, TypeSign};
use orthogeo::pregeo::Pregeometry;

use crate::CliError;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometryConfig>,
    #[serde(default)]
    pub verify: VerifyConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub amalgam: AmalgamConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        // serde_json reports line and column
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn geometry(&self) -> Result<&GeometryConfig, CliError> {
        self.geometry.as_ref().ok_or_else(|| CliError::Config("the config has no `geometry` section".into()))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeometryConfig {
    /// Nondegenerate subspaces of an orthogonal space over `F_q`.
    Orth(OrthConfig),
    /// A built-in example: `tetrahedron`, `octahedron`, `hemi_octahedron`,
    /// `hexagon`, `pg22`, `pg32`.
    Fixture { name: String },
    /// A pregeometry in the JSON interchange format.
    File { path: PathBuf },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OrthConfig {
    pub q: u32,
    /// Projective dimension; the space is `F_q^{n+1}`.
    pub n: usize,
    /// Sign of the standard form used when no Gram matrix is given.
    #[serde(default = "plus")]
    pub sign: TypeSign,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gram: Option<Vec<Vec<u32>>>,
    #[serde(default)]
    pub hall: HallConfig,
}

fn plus() -> TypeSign {
    TypeSign::Plus
}

/// Admissible labels: a name or an explicit list of `{"dim", "sign"}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HallConfig {
    /// `everything`, `standard+`, `standard-` or `both_planes`.
    Named(String),
    Labels(Vec<Label>),
}

impl Default for HallConfig {
    fn default() -> Self {
        HallConfig::Named("everything".into())
    }
}

impl OrthConfig {
    pub fn form(&self) -> Result<BilinearForm, CliError> {
        let field = Field::new(self.q).map_err(|e| CliError::Config(format!("q = {}: {e}", self.q)))?;
        let form = match &self.gram {
            Some(rows) => {
                let m = Matrix::from_rows(rows).map_err(|e| CliError::Config(format!("gram: {e}")))?;
                BilinearForm::new(field, m).map_err(|e| CliError::Config(format!("gram: {e}")))?
            }
            None => BilinearForm::standard(field, self.n + 1, self.sign).map_err(|e| CliError::Config(e.to_string()))?,
        };
        if form.dim() != self.n + 1 {
            return Err(CliError::Config(format!("gram is {0}×{0} but n + 1 = {1}", form.dim(), self.n + 1)));
        }
        Ok(form)
    }

    pub fn hall(&self) -> Result<Hall, CliError> {
        Ok(match &self.hall {
            HallConfig::Named(s) => match s.as_str() {
                "everything" => Hall::everything(self.n),
                "standard+" => Hall::standard(self.n, TypeSign::Plus),
                "standard-" => Hall::standard(self.n, TypeSign::Minus),
                "both_planes" => Hall::rank3_both_planes(),
                other => return Err(CliError::Config(format!("unknown hall `{other}`"))),
            },
            HallConfig::Labels(l) => Hall::new(l.clone()),
        })
    }

    /// The geometry on the admissible labels, without realising a hall.
    pub fn geometry(&self) -> Result<OrthGeometry, CliError> {
        OrthGeometry::with_labels(self.form()?, &self.hall()?).map_err(|e| CliError::Config(e.to_string()))
    }

    /// The geometry with a concrete hall `W`.
    pub fn geometry_with_hall(&self) -> Result<OrthGeometry, CliError> {
        OrthGeometry::with_hall(self.form()?, &self.hall()?).map_err(|e| CliError::Config(e.to_string()))
    }
}

/// An explicit pregeometry with, for fixtures, its automorphism group.
pub struct Explicit {
    pub geometry: Pregeometry,
    pub group: Option<GroupSpec<Perm>>,
}

impl GeometryConfig {
    pub fn explicit(&self) -> Result<Explicit, CliError> {
        match self {
            GeometryConfig::Orth(_) => Err(CliError::Config("expected an explicit geometry".into())),
            GeometryConfig::Fixture { name } => {
                let (geometry, group) = match name.as_str() {
                    "tetrahedron" => (fixtures::tetrahedron(), Some(fixtures::tetrahedron_group())),
                    "octahedron" => {
                        let (g, a) = fixtures::octahedron();
                        (g, Some(a))
                    }
                    "hemi_octahedron" => {
                        let (g, a) = fixtures::hemi_octahedron();
                        (g, Some(a))
                    }
                    "hexagon" => (fixtures::hexagon(), None),
                    "pg22" => (fixtures::pg22(), None),
                    "pg32" => (fixtures::pg32(), None),
                    other => return Err(CliError::Config(format!("unknown fixture `{other}`"))),
                };
                Ok(Explicit { geometry, group })
            }
            GeometryConfig::File { path } => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
                let geometry =
                    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                Ok(Explicit { geometry, group: None })
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lemma {
    Pointline,
    Diameter,
    Linecounts,
    Typerules,
    Geometryaxioms,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma: Option<Lemma>,
    /// Sample count for sampled sweeps.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub exhaustive: bool,
    /// Expected collinearity diameter.
    #[serde(default = "default_diameter")]
    pub diameter: usize,
}

fn default_samples() -> usize {
    500
}

fn default_diameter() -> usize {
    2
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { lemma: None, samples: default_samples(), exhaustive: false, diameter: default_diameter() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleShape {
    Triangle,
    Quadrangle,
    Pentagon,
    Cycle,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    #[serde(default = "default_shapes")]
    pub shapes: Vec<CycleShape>,
    /// Instances per shape.
    #[serde(default = "default_count")]
    pub count: usize,
    /// Longest random cycle is `2 · max_polygon`.
    #[serde(default = "default_max_polygon")]
    pub max_polygon: usize,
    /// Cycles to certify instead of random ones: a JSON list of cycles of
    /// subspaces.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
}

fn default_shapes() -> Vec<CycleShape> {
    vec![CycleShape::Triangle]
}

fn default_count() -> usize {
    100
}

fn default_max_polygon() -> usize {
    5
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            shapes: default_shapes(),
            count: default_count(),
            max_polygon: default_max_polygon(),
            file: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AmalgamAction {
    Present,
    Enumerate,
    Tits,
    ShapeReduce,
    Cover,
}

/// Which flags of the hall make up the shape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeConfig {
    All,
    /// Flags whose residue has rank at most `k`.
    RankAtMost(usize),
    /// Flags as lists of hall positions.
    Flags(Vec<Vec<usize>>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmalgamConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<AmalgamAction>,
    /// An explicit amalgam of permutation groups (for `present` and
    /// `enumerate`); otherwise the parabolics of the geometry are used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<AmalgamSpec>,
    #[serde(default = "default_shape")]
    pub shape: ShapeConfig,
    /// Certificates per shape for the certificate-scale Tits check.
    #[serde(default = "default_evidence")]
    pub certificates: usize,
}

fn default_shape() -> ShapeConfig {
    ShapeConfig::All
}

fn default_evidence() -> usize {
    50
}

impl Default for AmalgamConfig {
    fn default() -> Self {
        AmalgamConfig { action: None, spec: None, shape: default_shape(), certificates: default_evidence() }
    }
}
