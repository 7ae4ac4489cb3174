//! Maps an INI file onto a [`RunConfig`], starting from the preset of the
//! chosen problem kind.

use std::collections::BTreeSet;
use std::fmt::Debug;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use morphopt::driver::{Domain, RunConfig};
use morphopt::mesh::{Point2, Rect};
use morphopt::problems::ProblemKind;

use crate::ini::Ini;

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

type Result<T> = std::result::Result<T, ConfigError>;

const SECTIONS: [&str; 6] = ["problem", "mesh", "fem", "spline", "optimizer", "output"];

struct Reader<'a> {
    ini: &'a Ini,
    used: BTreeSet<(String, String)>,
}

impl<'a> Reader<'a> {
    fn raw(&mut self, section: &str, key: &str) -> Option<(&'a str, usize)> {
        self.used.insert((section.to_string(), key.to_string()));
        self.ini.get(section, key).map(|e| (e.value.as_str(), e.line))
    }

    fn set<T: FromStr + Debug>(&mut self, section: &str, key: &str, target: &mut T) -> Result<()>
    where
        T::Err: std::fmt::Display,
    {
        match self.raw(section, key) {
            Some((v, line)) => {
                *target = parse(v, line, section, key)?;
            }
            None => log::info!("[{section}] {key} = {target:?} (default)"),
        }
        Ok(())
    }

    fn list(&mut self, section: &str, key: &str) -> Result<Option<Vec<f64>>> {
        let Some((v, line)) = self.raw(section, key) else {
            return Ok(None);
        };
        v.split(|c: char| c == ',' || c.is_whitespace())
            .filter(|t| !t.is_empty())
            .map(|t| parse(t, line, section, key))
            .collect::<Result<Vec<f64>>>()
            .map(Some)
    }

    fn fixed<const N: usize>(&mut self, section: &str, key: &str) -> Result<Option<[f64; N]>> {
        let line = self.ini.get(section, key).map_or(0, |e| e.line);
        match self.list(section, key)? {
            None => Ok(None),
            Some(v) => v
                .try_into()
                .map(Some)
                .map_err(|_| ConfigError(format!("line {line}: [{section}] {key} needs {N} numbers"))),
        }
    }

    fn bool(&mut self, section: &str, key: &str, target: &mut bool) -> Result<()> {
        match self.raw(section, key) {
            Some((v, line)) => {
                *target = match v {
                    "true" | "yes" | "on" | "1" => true,
                    "false" | "no" | "off" | "0" => false,
                    _ => return Err(ConfigError(format!("line {line}: [{section}] {key}: `{v}` is not a boolean"))),
                }
            }
            None => log::info!("[{section}] {key} = {target} (default)"),
        }
        Ok(())
    }
}

fn parse<T: FromStr>(v: &str, line: usize, section: &str, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| ConfigError(format!("line {line}: [{section}] {key}: cannot parse `{v}`: {e}")))
}

fn rect([x0, y0, x1, y1]: [f64; 4]) -> Result<Rect> {
    if !(x0 < x1 && y0 < y1) {
        return Err(ConfigError(format!("degenerate rectangle {x0} {y0} {x1} {y1}")));
    }
    Ok(Rect::new(Point2::new(x0, y0), Point2::new(x1, y1)))
}

pub fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read config file {}: {e}", path.display())))?;
    let ini = Ini::parse(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    let mut cfg = from_ini(&ini).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    // relative mesh paths are resolved against the config file
    if let (Some(file), Some(dir)) = (&cfg.mesh_file, path.parent()) {
        if file.is_relative() {
            cfg.mesh_file = Some(dir.join(file));
        }
    }
    Ok(cfg)
}

pub fn from_ini(ini: &Ini) -> Result<RunConfig> {
    if let Some(s) = ini.sections.keys().find(|s| !SECTIONS.contains(&s.as_str())) {
        return Err(ConfigError(format!("unknown section [{s}]")));
    }
    let mut r = Reader {
        ini,
        used: BTreeSet::new(),
    };
    let (kind_name, line) = r
        .raw("problem", "kind")
        .ok_or_else(|| ConfigError("[problem] kind is required".into()))?;
    let kind = ProblemKind::from_name(kind_name)
        .ok_or_else(|| ConfigError(format!("line {line}: unknown problem kind `{kind_name}`")))?;
    let mut c = RunConfig::preset(kind);

    // [problem]
    let explicit_reference = ini.get("problem", "reference").is_some();
    let mut reference = c.reference.unwrap_or(f64::NAN);
    r.set("problem", "reference", &mut reference)?;
    c.reference = reference.is_finite().then_some(reference);
    match kind {
        ProblemKind::Bernoulli => {
            r.set("problem", "optimal_radius", &mut c.bernoulli.optimal_radius)?;
            r.set("problem", "inner_value", &mut c.bernoulli.inner_value)?;
            r.set("problem", "flux", &mut c.bernoulli.flux)?;
        }
        ProblemKind::Stokes => {
            r.set("problem", "inflow_speed", &mut c.stokes.inflow_speed)?;
            r.bool("problem", "zero_mean", &mut c.stokes.zero_mean)?;
            r.set("problem", "area_weight", &mut c.stokes.weights[0])?;
            let mut bary = c.stokes.weights[1];
            r.set("problem", "barycenter_weight", &mut bary)?;
            c.stokes.weights[1] = bary;
            c.stokes.weights[2] = bary;
        }
        ProblemKind::Elasticity => {
            r.set("problem", "young", &mut c.elasticity.young)?;
            r.set("problem", "poisson", &mut c.elasticity.poisson)?;
            r.bool("problem", "plane_stress", &mut c.elasticity.plane_stress)?;
            r.set("problem", "area_weight", &mut c.elasticity.area_weight)?;
            if let Some(t) = r.fixed::<2>("problem", "traction")? {
                c.elasticity.traction = t;
            }
        }
        ProblemKind::Model => {}
    }
    if !explicit_reference && c.bernoulli != RunConfig::preset(kind).bernoulli {
        // the known optimum belongs to the default data only
        c.reference = None;
    }

    // [mesh]
    if let Some((f, _)) = r.raw("mesh", "file") {
        c.mesh_file = Some(PathBuf::from(f));
    }
    r.set("mesh", "refinements", &mut c.refinements)?;
    let outer = r.fixed::<4>("mesh", "outer")?.map(rect).transpose()?;
    match &mut c.domain {
        Domain::Annulus(d) => {
            if let Some([x, y, rad]) = r.fixed::<3>("mesh", "hole")? {
                d.hole.center = Point2::new(x, y);
                d.hole.radius = rad;
            }
            if let Some(o) = outer {
                d.outer = o;
                c.stokes.channel = o;
            }
            r.set("mesh", "n_theta", &mut d.n_theta)?;
            r.set("mesh", "n_r", &mut d.n_r)?;
            r.set("mesh", "grading", &mut d.options.grading)?;
        }
        Domain::Rectangle(d) => {
            if let Some(o) = outer {
                d.rect = o;
            }
            r.set("mesh", "nx", &mut d.nx)?;
            r.set("mesh", "ny", &mut d.ny)?;
            if let Some(v) = r.list("mesh", "clamped")? {
                d.clamped = intervals(&v, "clamped")?;
            }
            if let Some(v) = r.list("mesh", "loaded")? {
                d.loaded = intervals(&v, "loaded")?;
            }
        }
    }

    // [fem]
    r.set("fem", "degree", &mut c.fe_degree)?;
    r.bool("fem", "isoparametric", &mut c.isoparametric)?;

    // [spline]
    r.set("spline", "degree", &mut c.spline_degree)?;
    r.set("spline", "grid_width", &mut c.grid_width)?;
    if let Some(b) = r.fixed::<4>("spline", "box")? {
        c.hold_all = rect(b)?;
    }

    // [optimizer]
    r.set("optimizer", "max_iterations", &mut c.max_iterations)?;
    if let Some(g) = r.list("optimizer", "step_grid")? {
        c.step_grid = g;
    }
    r.set("optimizer", "det_threshold", &mut c.det_threshold)?;
    r.set("optimizer", "gradient_tolerance", &mut c.gradient_tolerance)?;
    r.set("optimizer", "retry_scale", &mut c.retry_scale)?;

    // [output]
    if let Some((d, _)) = r.raw("output", "dir") {
        c.output_dir = Some(PathBuf::from(d));
    }

    for (section, keys) in &ini.sections {
        if let Some((key, e)) = keys.iter().find(|(k, _)| !r.used.contains(&(section.clone(), (*k).clone()))) {
            return Err(ConfigError(format!(
                "line {}: unknown key `{key}` in [{section}] for problem kind {kind}",
                e.line
            )));
        }
    }
    c.validate().map_err(|e| ConfigError(e.to_string()))?;
    Ok(c)
}

fn intervals(v: &[f64], key: &str) -> Result<Vec<(f64, f64)>> {
    if v.len() % 2 != 0 {
        return Err(ConfigError(format!("[mesh] {key} needs pairs of numbers")));
    }
    Ok(v.chunks(2).map(|p| (p[0], p[1])).collect())
}
