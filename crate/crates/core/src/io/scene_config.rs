//! Typed loaders for scene, chirp, aperture, training and loss-weight files.
//!
//! Each loader reads one section of a [`Document`]; keys not listed below are
//! rejected and omitted keys take the defaults shown.
//!
//! ```text
//! [bounds]    center = 0, 0, 0      side = 0.36
//! [scene]     kind = points | single | two | sphere | sheet | random
//!             point = x, y, z [, intensity]     (repeatable, kind = points)
//!             grid = 64                         (snapping grid of bundled scenes)
//!             amplitude, base_freq, growth, extent, spacing   (kind = sheet)
//!             count = 16                        (kind = random)
//!             seed = 0
//! [chirp]     f0 = 1e9  slope = 70.295e12  sample_rate = 5e6  num_samples = 256
//!             bandwidth (overrides slope)       bin_margin = 2
//! [aperture]  radius = 0.23  angles = 90  heights = 4  height_extent = 0.28
//!             center = 0, 0, 0
//! [train]     method = spectral  iterations = 500  learning_rate  adam_beta1 = 0.9
//!             adam_beta2 = 0.999  adam_eps = 1e-8  poses_per_step = 4
//!             reg_samples_per_step = 1024  query_resolution = 32  clearance = 0.05
//!             query_jitter = true  voxel_init = 0.1  seed = 0  reproducible = true
//!             encoding_frequencies = 6  hidden = 64, 64  output_bias = -7
//!             output_scale = 100
//!             (learning_rate defaults to 3 for voxel fields and 3e-3 for
//!             networks; query_resolution to 32 and 16)
//! [weights]   lambda = 0.5  beta = 0.01  gamma = 0.01  epsilon  stage_fraction = 0.1
//! ```

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Document, SectionView};
use crate::experiments::{sheet_parameters, BundledScene};
use crate::geometry::{cylindrical_aperture, Aperture, SceneBounds, DEFAULT_BIN_MARGIN};
use crate::recon::{LossWeights, Method, TrainConfig};
use crate::scene::{sheet_benchmark, InrConfig, PointScatterer, PointScatterers, VoxelField};
use crate::signal::{ChirpConfig, DEFAULT_START_FREQUENCY};
use crate::{Error, Result, Vec3};

/// Default snapping resolution of the bundled scenes.
pub const DEFAULT_SCENE_GRID: usize = 64;

fn section<'a>(doc: &'a Document, name: &str, known: &[&str]) -> Result<SectionView<'a>> {
    let view = doc.require(name)?;
    view.only(known)?;
    Ok(view)
}

fn positive(view: &SectionView, key: &str, value: f64) -> Result<f64> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        let entry = view.entry(key).expect("checked keys come from entries");
        Err(view.error(entry, format!("'{key}' must be positive")))
    }
}

fn bool_entry(view: &SectionView, key: &str, default: bool) -> Result<bool> {
    match view.entry(key) {
        None => Ok(default),
        Some(e) => match e.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            other => Err(view.error(e, format!("'{key}' must be true or false, got '{other}'"))),
        },
    }
}

/// Per-axis resolution given as one count or three.
fn resolution_entry(view: &SectionView, key: &str, default: [usize; 3]) -> Result<[usize; 3]> {
    let Some(entry) = view.entry(key) else {
        return Ok(default);
    };
    let items: Vec<&str> = entry.value.split(',').map(str::trim).collect();
    let parsed: std::result::Result<Vec<usize>, _> = items.iter().map(|s| s.parse::<usize>()).collect();
    match parsed.as_deref() {
        Ok([r]) if *r > 0 => Ok([*r; 3]),
        Ok([a, b, c]) if *a > 0 && *b > 0 && *c > 0 => Ok([*a, *b, *c]),
        _ => Err(view.error(entry, format!("'{key}' needs one or three positive counts"))),
    }
}

/// What the ground truth is made of.
#[derive(Debug, Clone, PartialEq)]
pub enum SceneSource {
    Points(PointScatterers),
    Bundled { scene: BundledScene, grid: usize },
    Sheet { amplitude: f64, base_freq: f64, growth: f64, extent: f64, spacing: f64 },
    Random { count: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub bounds: SceneBounds,
    pub source: SceneSource,
    pub seed: u64,
}

impl SceneConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_document(&Document::load(path)?)
    }

    pub fn from_document(doc: &Document) -> Result<Self> {
        let b = section(doc, "bounds", &["center", "side"])?;
        let center = b.vec3("center")?.unwrap_or([0.0; 3]);
        let side = b.get_or("side", 0.36)?;
        let bounds = SceneBounds::new(Vec3::from(center), side)?;

        let s = section(
            doc,
            "scene",
            &["kind", "point", "grid", "amplitude", "base_freq", "growth", "extent", "spacing", "count", "seed"],
        )?;
        let seed = s.get_or("seed", 0u64)?;
        let kind = s.string("kind").unwrap_or("points");
        let source = match kind {
            "points" => {
                let mut points = Vec::new();
                for e in s.all("point") {
                    let v = s.list_entry(e)?;
                    let (position, intensity) = match v.as_slice() {
                        [x, y, z] => (Vec3::new(*x, *y, *z), 1.0),
                        [x, y, z, i] => (Vec3::new(*x, *y, *z), *i),
                        _ => return Err(s.error(e, "'point' needs x, y, z and an optional intensity")),
                    };
                    if !(intensity >= 0.0 && intensity.is_finite()) {
                        return Err(s.error(e, "point intensity must be finite and >= 0"));
                    }
                    points.push(PointScatterer { position, intensity });
                }
                let points = PointScatterers::new(points)?;
                points.check_inside(&bounds)?;
                SceneSource::Points(points)
            }
            "sheet" => {
                let [amp, freq, growth] = sheet_parameters(side);
                SceneSource::Sheet {
                    amplitude: s.get_or("amplitude", amp)?,
                    base_freq: s.get_or("base_freq", freq)?,
                    growth: s.get_or("growth", growth)?,
                    extent: s.get_or("extent", 0.6 * side)?,
                    spacing: s.get_or("spacing", side / 32.0)?,
                }
            }
            "random" => {
                let count = s.get_or("count", 16usize)?;
                if count == 0 {
                    return Err(s.error(s.entry("count").expect("count present when zero"), "count must be >= 1"));
                }
                SceneSource::Random { count }
            }
            other => {
                let scene: BundledScene = other.parse().map_err(|_| {
                    s.error(
                        s.entry("kind").expect("kind present"),
                        format!("unknown scene kind '{other}' (points, single, two, sphere, sheet, random)"),
                    )
                })?;
                let grid = s.get_or("grid", DEFAULT_SCENE_GRID)?;
                if grid == 0 {
                    return Err(s.error(s.entry("grid").expect("grid present when zero"), "grid must be >= 1"));
                }
                SceneSource::Bundled { scene, grid }
            }
        };
        Ok(Self { bounds, source, seed })
    }

    /// The ground-truth scatterers.
    pub fn points(&self) -> Result<PointScatterers> {
        let c = self.bounds.center;
        let points = match &self.source {
            SceneSource::Points(p) => p.clone(),
            SceneSource::Bundled { scene, grid } => scene.points(&VoxelField::zeros(self.bounds, [*grid; 3])?),
            SceneSource::Sheet { amplitude, base_freq, growth, extent, spacing } => {
                sheet_benchmark(*amplitude, *base_freq, *growth, *extent, *spacing)?.translated(c)
            }
            SceneSource::Random { count } => {
                // Kept away from the faces so the scene stays clear of a
                // tight aperture.
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                let h = 0.4 * self.bounds.side;
                let points = (0..*count)
                    .map(|_| PointScatterer {
                        position: c + Vec3::new(
                            rng.random_range(-h..h),
                            rng.random_range(-h..h),
                            rng.random_range(-h..h),
                        ),
                        intensity: rng.random_range(0.5..1.0),
                    })
                    .collect();
                PointScatterers::new(points)?
            }
        };
        points.check_inside(&self.bounds)?;
        Ok(points)
    }
}

/// Chirp and the bin margin added to the valid-bin count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChirpFile {
    pub chirp: ChirpConfig,
    pub bin_margin: usize,
}

pub fn load_chirp(path: impl AsRef<Path>) -> Result<ChirpFile> {
    chirp_from(&Document::load(path)?)
}

pub fn chirp_from(doc: &Document) -> Result<ChirpFile> {
    let s = section(doc, "chirp", &["f0", "slope", "sample_rate", "num_samples", "bandwidth", "bin_margin"])?;
    let r = ChirpConfig::reference(s.get_or("f0", DEFAULT_START_FREQUENCY)?);
    let mut chirp = ChirpConfig::new(
        r.f0,
        s.get_or("slope", r.slope)?,
        s.get_or("sample_rate", r.sample_rate)?,
        s.get_or("num_samples", r.num_samples)?,
    )?;
    if let Some(b) = s.get::<f64>("bandwidth")? {
        chirp = chirp.with_bandwidth(positive(&s, "bandwidth", b)?);
        chirp.validate()?;
    }
    Ok(ChirpFile { chirp, bin_margin: s.get_or("bin_margin", DEFAULT_BIN_MARGIN)? })
}

pub fn load_aperture(path: impl AsRef<Path>) -> Result<Aperture> {
    aperture_from(&Document::load(path)?)
}

pub fn aperture_from(doc: &Document) -> Result<Aperture> {
    let s = section(doc, "aperture", &["radius", "angles", "heights", "height_extent", "center"])?;
    let center = s.vec3("center")?.unwrap_or([0.0; 3]);
    cylindrical_aperture(
        s.get_or("radius", 0.23)?,
        s.get_or("angles", 90)?,
        s.get_or("heights", 4)?,
        s.get_or("height_extent", 0.28)?,
        Vec3::from(center),
    )
}

/// Training settings plus the field initialization they apply to.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainFile {
    pub config: TrainConfig,
    /// Whether `learning_rate` was given; otherwise the default depends on
    /// the field kind (see [`TrainFile::config_for`]).
    pub learning_rate_set: bool,
    /// Same for `query_resolution`.
    pub query_resolution_set: bool,
    pub voxel_init: f64,
    pub inr: InrConfig,
}

impl Default for TrainFile {
    fn default() -> Self {
        Self {
            config: TrainConfig::default(),
            learning_rate_set: false,
            query_resolution_set: false,
            voxel_init: 0.1,
            inr: InrConfig::default(),
        }
    }
}

impl TrainFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_document(&Document::load(path)?)
    }

    pub fn from_document(doc: &Document) -> Result<Self> {
        let s = section(
            doc,
            "train",
            &[
                "method",
                "iterations",
                "learning_rate",
                "adam_beta1",
                "adam_beta2",
                "adam_eps",
                "poses_per_step",
                "reg_samples_per_step",
                "query_resolution",
                "clearance",
                "query_jitter",
                "voxel_init",
                "seed",
                "reproducible",
                "encoding_frequencies",
                "hidden",
                "output_bias",
                "output_scale",
            ],
        )?;
        let d = TrainFile::default();
        let mut cfg = d.config.clone();
        if let Some(e) = s.entry("method") {
            cfg.method = e.value.parse::<Method>().map_err(|err| s.error(e, err.to_string()))?;
        }
        cfg.iterations = s.get_or("iterations", cfg.iterations)?;
        let lr = s.get::<f64>("learning_rate")?;
        if let Some(lr) = lr {
            cfg.adam.lr = lr;
        }
        cfg.adam.beta1 = s.get_or("adam_beta1", cfg.adam.beta1)?;
        cfg.adam.beta2 = s.get_or("adam_beta2", cfg.adam.beta2)?;
        cfg.adam.eps = s.get_or("adam_eps", cfg.adam.eps)?;
        cfg.poses_per_step = s.get_or("poses_per_step", cfg.poses_per_step)?;
        cfg.reg_samples_per_step = s.get_or("reg_samples_per_step", cfg.reg_samples_per_step)?;
        cfg.query_resolution = resolution_entry(&s, "query_resolution", cfg.query_resolution)?;
        cfg.clearance = s.get_or("clearance", cfg.clearance)?;
        cfg.query_jitter = bool_entry(&s, "query_jitter", cfg.query_jitter)?;
        cfg.seed = s.get_or("seed", cfg.seed)?;
        cfg.reproducible = bool_entry(&s, "reproducible", cfg.reproducible)?;
        cfg.validate()?;

        let voxel_init = s.get_or("voxel_init", d.voxel_init)?;
        if !(voxel_init >= 0.0 && voxel_init.is_finite()) {
            return Err(Error::config("voxel_init must be finite and >= 0"));
        }
        let mut inr = d.inr.clone();
        inr.encoding_frequencies = s.get_or("encoding_frequencies", inr.encoding_frequencies)?;
        if let Some(e) = s.entry("hidden") {
            inr.hidden = e
                .value
                .split(',')
                .map(|w| w.trim().parse::<usize>().ok().filter(|w| *w > 0))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| s.error(e, "'hidden' needs comma-separated positive widths"))?;
        }
        inr.output_bias = s.get_or("output_bias", inr.output_bias)?;
        inr.output_scale = s.get_or("output_scale", inr.output_scale)?;
        inr.seed = cfg.seed;
        Ok(Self {
            config: cfg,
            learning_rate_set: lr.is_some(),
            query_resolution_set: s.entry("query_resolution").is_some(),
            voxel_init,
            inr,
        })
    }

    /// The training configuration with the learning-rate and query-grid
    /// defaults of the chosen field kind filled in.
    pub fn config_for(&self, inr: bool) -> TrainConfig {
        let mut cfg = self.config.clone();
        let defaults = if inr { TrainConfig::for_inr() } else { TrainConfig::default() };
        if !self.learning_rate_set {
            cfg.adam.lr = defaults.adam.lr;
        }
        if !self.query_resolution_set {
            cfg.query_resolution = defaults.query_resolution;
        }
        cfg
    }
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<LossWeights> {
    weights_from(&Document::load(path)?)
}

pub fn weights_from(doc: &Document) -> Result<LossWeights> {
    let s = section(doc, "weights", &["lambda", "beta", "gamma", "epsilon", "stage_fraction"])?;
    let d = LossWeights::default();
    let w = LossWeights {
        lambda: s.get_or("lambda", d.lambda)?,
        beta: s.get_or("beta", d.beta)?,
        gamma: s.get_or("gamma", d.gamma)?,
        epsilon: s.get("epsilon")?,
        stage_fraction: s.get_or("stage_fraction", d.stage_fraction)?,
    };
    w.validate()?;
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recon::{INR_LEARNING_RATE, INR_QUERY_RESOLUTION, VOXEL_LEARNING_RATE};

    fn doc(text: &str) -> Document {
        Document::parse(text, "t.cfg").unwrap()
    }

    #[test]
    fn explicit_points_scene() {
        let cfg = SceneConfig::from_document(&doc(
            "[bounds]\nside = 0.36\n[scene]\npoint = 0.01, 0, 0\npoint = 0, 0.02, 0, 0.5\nseed = 3\n",
        ))
        .unwrap();
        let p = cfg.points().unwrap();
        assert_eq!(p.len(), 2);
        assert_eq!(p.points[1].intensity, 0.5);
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn bundled_and_random_scenes() {
        let single = SceneConfig::from_document(&doc("[bounds]\n[scene]\nkind = single\n")).unwrap();
        assert_eq!(single.points().unwrap().len(), 1);
        let r = doc("[bounds]\n[scene]\nkind = random\ncount = 7\nseed = 2\n");
        let a = SceneConfig::from_document(&r).unwrap().points().unwrap();
        let b = SceneConfig::from_document(&r).unwrap().points().unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 7);
        let sheet = SceneConfig::from_document(&doc("[bounds]\n[scene]\nkind = sheet\n")).unwrap();
        assert!(sheet.points().unwrap().len() > 100);
    }

    #[test]
    fn scene_errors_point_at_the_entry() {
        let bad = SceneConfig::from_document(&doc("[bounds]\n[scene]\nkind = cube\n"));
        match bad {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(SceneConfig::from_document(&doc("[bounds]\n[scene]\npoint = 1, 2\n")).is_err());
        let outside = SceneConfig::from_document(&doc("[bounds]\nside = 0.1\n[scene]\npoint = 1, 0, 0\n"));
        assert!(outside.is_err());
        assert!(SceneConfig::from_document(&doc("[bounds]\nsize = 2\n[scene]\n")).is_err());
        assert!(SceneConfig::from_document(&doc("[scene]\nkind = single\n")).is_err());
    }

    #[test]
    fn chirp_and_aperture_defaults() {
        let c = chirp_from(&doc("[chirp]\n")).unwrap();
        assert_eq!(c.chirp, ChirpConfig::reference(DEFAULT_START_FREQUENCY));
        assert_eq!(c.bin_margin, DEFAULT_BIN_MARGIN);
        let b = chirp_from(&doc("[chirp]\nf0 = 4e9\nbandwidth = 4e8\n")).unwrap();
        assert!((b.chirp.bandwidth() - 4e8).abs() < 1e-3);
        assert_eq!(b.chirp.f0, 4e9);
        assert!(chirp_from(&doc("[chirp]\nnum_samples = 0\n")).is_err());
        let a = aperture_from(&doc("[aperture]\nangles = 12\nheights = 2\n")).unwrap();
        assert_eq!(a.len(), 24);
    }

    #[test]
    fn train_and_weights() {
        let t = TrainFile::from_document(&doc(
            "[train]\nmethod = rq\niterations = 20\nquery_resolution = 8, 8, 16\nquery_jitter = false\nhidden = 16, 8\n",
        ))
        .unwrap();
        assert_eq!(t.config.method, Method::Rq);
        assert_eq!(t.config.query_resolution, [8, 8, 16]);
        assert!(!t.config.query_jitter);
        assert_eq!(t.inr.hidden, vec![16, 8]);
        assert_eq!(t.config_for(false).adam.lr, VOXEL_LEARNING_RATE);
        assert_eq!(t.config_for(true).adam.lr, INR_LEARNING_RATE);
        assert_eq!(t.config_for(true).query_resolution, [8, 8, 16]);
        let fixed = TrainFile::from_document(&doc("[train]\nlearning_rate = 0.5\n")).unwrap();
        assert_eq!(fixed.config_for(true).adam.lr, 0.5);
        assert_eq!(fixed.config_for(true).query_resolution, [INR_QUERY_RESOLUTION; 3]);
        assert_eq!(fixed.config_for(false).query_resolution, [32; 3]);
        assert!(TrainFile::from_document(&doc("[train]\niterations = 0\n")).is_err());
        assert!(TrainFile::from_document(&doc("[train]\nquery_jitter = maybe\n")).is_err());

        let w = weights_from(&doc("[weights]\nbeta = 0\nepsilon = 0.002\n")).unwrap();
        assert_eq!(w.beta, 0.0);
        assert_eq!(w.epsilon, Some(0.002));
        assert_eq!(w.lambda, 0.5);
        assert!(weights_from(&doc("[weights]\nstage_fraction = 2\n")).is_err());
    }
}
