//! Site configuration files (`site/1`, TOML).
//!
//! ```toml
//! version = "site/1"
//! site = "INT"
//! rx = [0.0, 0.0, 15.0]
//!
//! [budget]
//! tx_power_dbm = 28.0
//!
//! [[sidewalk]]
//! id = "Int-N-E"
//! sector = [90.0, 150.0]
//! measurement = "int-n-e.mms"
//! facades = [[[10.0, -50.0, 0.0], [10.0, 400.0, 0.0]]]
//! corners = [[12.0, 30.0, 0.0]]
//! ```
//!
//! Relative measurement paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::coverage::LinkBudget;
use crate::error::{Error, Result};
use crate::geometry::{CornerPoint, FacadeLine, Position3D};
use crate::scm::Sector;

pub const SITE_VERSION: &str = "site/1";

type Triple = [f64; 3];

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SiteDoc {
    version: String,
    site: String,
    rx: Triple,
    #[serde(default)]
    budget: Option<toml::Table>,
    #[serde(default, rename = "sidewalk")]
    sidewalks: Vec<SidewalkDoc>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SidewalkDoc {
    id: String,
    sector: [f64; 2],
    #[serde(default)]
    measurement: Option<PathBuf>,
    #[serde(default)]
    facades: Vec<[Triple; 2]>,
    #[serde(default)]
    corners: Vec<Triple>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidewalkSite {
    pub id: String,
    pub sector: Sector,
    pub measurement: Option<PathBuf>,
    pub facades: Vec<FacadeLine>,
    pub corners: Vec<CornerPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SiteConfig {
    pub site: String,
    pub rx: Position3D,
    pub budget: LinkBudget,
    pub sidewalks: Vec<SidewalkSite>,
}

fn pos(t: Triple) -> Position3D {
    Position3D::new(t[0], t[1], t[2])
}

impl SiteConfig {
    pub fn sidewalk(&self, id: &str) -> Option<&SidewalkSite> {
        self.sidewalks.iter().find(|s| s.id.eq_ignore_ascii_case(id))
    }
}

pub fn parse_site_str(text: &str, base_dir: &Path) -> Result<SiteConfig> {
    let doc: SiteDoc = toml::from_str(text).map_err(|e| Error::invalid(format!("site config: {e}")))?;
    if doc.version != SITE_VERSION {
        return Err(Error::invalid(format!(
            "site config version `{}`, expected `{SITE_VERSION}`",
            doc.version
        )));
    }
    let rx = pos(doc.rx);
    rx.validate()?;
    let budget = match doc.budget {
        None => LinkBudget::default(),
        Some(table) => table
            .try_into()
            .map_err(|e| Error::invalid(format!("site config budget: {e}")))?,
    };
    budget.validate()?;
    let mut sidewalks = Vec::with_capacity(doc.sidewalks.len());
    for s in doc.sidewalks {
        for v in s.sector {
            if !(0.0..360.0).contains(&v) {
                return Err(Error::invalid(format!("sidewalk `{}`: sector bound {v} outside [0, 360)", s.id)));
            }
        }
        let measurement = match s.measurement {
            Some(p) => {
                let full = if p.is_absolute() { p } else { base_dir.join(p) };
                if !full.is_file() {
                    return Err(Error::invalid(format!(
                        "sidewalk `{}`: measurement file {} does not exist",
                        s.id,
                        full.display()
                    )));
                }
                Some(full)
            }
            None => None,
        };
        let facades = s
            .facades
            .iter()
            .map(|f| FacadeLine::new(pos(f[0]), pos(f[1])))
            .collect::<Result<Vec<_>>>()?;
        let corners = s.corners.iter().map(|&c| CornerPoint { pos: pos(c) }).collect();
        sidewalks.push(SidewalkSite {
            sector: Sector::new(s.sector[0], s.sector[1]),
            id: s.id,
            measurement,
            facades,
            corners,
        });
    }
    Ok(SiteConfig {
        site: doc.site,
        rx,
        budget,
        sidewalks,
    })
}

pub fn parse_site_file(path: impl AsRef<Path>) -> Result<SiteConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    parse_site_str(&text, dir).map_err(|e| e.in_file(path))
}
