//! Flat `key = value` pipeline configuration.
//!
//! Every key has a documented default; values from a file override the
//! defaults and explicit overrides (CLI flags) override the file. The source
//! of each resolved value is kept so it can be written to the run manifest.

use std::collections::BTreeMap;
use std::str::FromStr;

use serde::Serialize;

use crate::association::TrackerConfig;
use crate::ensemble::WbfParams;
use crate::error::{Error, Result};
use crate::geom::SceneKind;
use crate::metrics::EvalOptions;
use crate::postprocess::{MergeParams, PostprocessParams, Step};
use crate::search::SearchConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Default,
    File,
    Override,
}

pub struct KeySpec {
    pub key: &'static str,
    pub default: &'static str,
    pub doc: &'static str,
}

macro_rules! keys {
    ($($k:literal = $d:literal, $doc:literal;)*) => {
        pub const KEYS: &[KeySpec] = &[$(KeySpec { key: $k, default: $d, doc: $doc }),*];
    };
}

keys! {
    "tracker.high_thresh" = "0.6", "detections at or above this score enter the first association round";
    "tracker.low_thresh" = "0.1", "detections in [low, high) enter the second round; lower scores are dropped";
    "tracker.new_track_thresh" = "0.7", "unmatched high detections at or above this score start tracks";
    "tracker.match_thresh_round1" = "0.8", "maximum cost (1 - IoU) accepted in the first round";
    "tracker.match_thresh_round2" = "0.5", "maximum cost accepted in the second round";
    "tracker.track_buffer" = "30", "frames a lost track is kept before removal";
    "tracker.fuse_score" = "false", "multiply IoU by detection score in the first round";
    "tracker.border_margin" = "10", "pixels from the image border that count as near the border";
    "tracker.border_score_floor" = "0.6", "minimum score given to detections near the border (defaults to high_thresh)";
    "tracker.nsa" = "false", "scale measurement noise by (1 - score)";
    "tracker.use_warps" = "true", "apply camera-motion warps on dynamic scenes when a warp file exists";
    "fullbox.enabled" = "true", "extend border-clipped detections before tracking";
    "fullbox.mode" = "aspect", "aspect | height";
    "fullbox.aspect_ratio" = "2.6", "target height / width for aspect mode";
    "fullbox.margin" = "2", "pixels from the border that mark a box as clipped";
    "fullbox.height_samples" = "", "file of `y h` lines for height mode; empty means auto-extract";
    "fullbox.anchor" = "both", "height-model anchor for auto-extraction: top | bottom | both";
    "fullbox.sample_frame" = "0", "frame used for auto-extraction; 0 uses every frame";
    "fullbox.sample_min_score" = "0.8", "minimum score of auto-extracted samples";
    "ensemble.iou_thresh" = "0.55", "WBF cluster IoU threshold";
    "ensemble.score_thresh" = "0.05", "fused boxes below this score are dropped";
    "ensemble.weights" = "", "comma-separated per-model weights; empty means equal";
    "ensemble.rescale" = "true", "penalise boxes found by few models";
    "postprocess.steps" = "merge,interpolate,gsi,prune", "ordered subset of merge, interpolate, gsi, prune, or none";
    "postprocess.max_gap" = "30", "longest gap, in frames, filled by interpolation and GSI";
    "gsi.tau" = "10", "GP kernel length scale in frames";
    "gsi.noise" = "0.01", "GP observation noise variance";
    "prune.min_len" = "10", "tracks with fewer observed boxes are removed";
    "merge.max_gap" = "90", "largest gap between a lost track's end and a candidate's start";
    "merge.dist_thresh" = "auto", "center distance gate in pixels, or auto";
    "merge.dist_height_factor" = "0.5", "auto gate as a fraction of the lost track's mean height";
    "merge.area_ratio" = "1.6", "allowed box-area ratio between linked boxes";
    "merge.velocity_window" = "10", "observed boxes used to estimate velocity";
    "search.rounds" = "5", "search rounds";
    "search.steps_per_round" = "4", "sampling steps per round";
    "search.samples_per_step" = "8", "objective evaluations per step";
    "search.init_mean" = "0.5", "comma-separated initial mean, one entry per dimension";
    "search.std" = "0.2", "sampling standard deviation";
    "search.lower" = "0", "lower bound, one value or one per dimension";
    "search.upper" = "1", "upper bound, one value or one per dimension";
    "search.clip_epsilon" = "0.2", "PPO2 ratio clip";
    "search.learning_rate" = "0.1", "step size on the surrogate";
    "search.epochs" = "1", "gradient steps per batch";
    "search.seed" = "0", "sampling seed";
    "eval.iou_thresh" = "0.5", "CLEAR and IDF1 match threshold";
    "eval.visibility_thresh" = "0", "ground truth below this visibility is ignored";
    "eval.preprocess" = "true", "apply MOT17 distractor and ignore-region filtering";
    "eval.exclude_synthetic" = "false", "ignore interpolated boxes when scoring";
    "scene.default" = "static", "scene kind of sequences without a scene.<name> entry";
}

fn spec(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.key == key)
}

fn is_scene_key(key: &str) -> bool {
    key.strip_prefix("scene.").is_some_and(|n| !n.is_empty())
}

/// Resolved key/value pairs with their provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<String, (String, Source)>,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            values: KEYS
                .iter()
                .map(|k| (k.key.to_string(), (k.default.to_string(), Source::Default)))
                .collect(),
        }
    }
}

impl Config {
    /// Parses a config file over the defaults. Unknown keys are warned about and ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Config::default();
        for (k, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(k + 1, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            if spec(key).is_none() && !is_scene_key(key) {
                log::warn!("config line {}: unknown key `{key}` ignored", k + 1);
                continue;
            }
            cfg.values.insert(key.to_string(), (value.to_string(), Source::File));
        }
        cfg.pipeline()?;
        Ok(cfg)
    }

    /// Overrides one key; unknown keys are an error here.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if spec(key).is_none() && !is_scene_key(key) {
            return Err(Error::config(key, "unknown configuration key"));
        }
        self.values.insert(key.to_string(), (value.into(), Source::Override));
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(|(v, _)| v.as_str())
    }

    pub fn source(&self, key: &str) -> Option<Source> {
        self.values.get(key).map(|(_, s)| *s)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str, Source)> {
        self.values.iter().map(|(k, (v, s))| (k.as_str(), v.as_str(), *s))
    }

    fn raw(&self, key: &str) -> &str {
        self.get(key).unwrap_or_else(|| panic!("config key `{key}` has no default"))
    }

    fn num<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key);
        v.parse().map_err(|_| Error::config(key, format!("invalid value `{v}`")))
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key).to_ascii_lowercase().as_str() {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            v => Err(Error::config(key, format!("expected a boolean, got `{v}`"))),
        }
    }

    fn list(&self, key: &str) -> Result<Vec<f64>> {
        let v = self.raw(key);
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::config(key, format!("invalid number `{s}`"))))
            .collect()
    }

    /// Typed view of the configuration.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let tracker = TrackerConfig {
            high_thresh: self.num("tracker.high_thresh")?,
            low_thresh: self.num("tracker.low_thresh")?,
            new_track_thresh: self.num("tracker.new_track_thresh")?,
            match_thresh_round1: self.num("tracker.match_thresh_round1")?,
            match_thresh_round2: self.num("tracker.match_thresh_round2")?,
            track_buffer: self.num("tracker.track_buffer")?,
            fuse_score: self.flag("tracker.fuse_score")?,
            border_margin: self.num("tracker.border_margin")?,
            border_score_floor: self.num("tracker.border_score_floor")?,
            nsa: self.flag("tracker.nsa")?,
            warps: None,
        };
        tracker.validate().map_err(|e| Error::config("tracker", e.to_string()))?;

        let mode = match self.raw("fullbox.mode") {
            "aspect" => FullboxMode::Aspect,
            "height" => FullboxMode::Height,
            v => return Err(Error::config("fullbox.mode", format!("expected aspect|height, got `{v}`"))),
        };
        let anchor = match self.raw("fullbox.anchor") {
            "top" => AnchorChoice::Top,
            "bottom" => AnchorChoice::Bottom,
            "both" => AnchorChoice::Both,
            v => return Err(Error::config("fullbox.anchor", format!("expected top|bottom|both, got `{v}`"))),
        };
        let samples = self.raw("fullbox.height_samples");
        let fullbox = FullboxConfig {
            enabled: self.flag("fullbox.enabled")?,
            mode,
            aspect_ratio: self.num("fullbox.aspect_ratio")?,
            margin: self.num("fullbox.margin")?,
            height_samples: (!samples.is_empty()).then(|| samples.to_string()),
            anchor,
            sample_frame: self.num("fullbox.sample_frame")?,
            sample_min_score: self.num("fullbox.sample_min_score")?,
        };
        if !(fullbox.aspect_ratio > 0.0) {
            return Err(Error::config("fullbox.aspect_ratio", "must be positive"));
        }

        let ensemble = WbfParams {
            iou_thresh: self.num("ensemble.iou_thresh")?,
            score_thresh: self.num("ensemble.score_thresh")?,
            weights: self.list("ensemble.weights")?,
            rescale: self.flag("ensemble.rescale")?,
        };

        let steps_raw = self.raw("postprocess.steps");
        let steps = if steps_raw.eq_ignore_ascii_case("none") || steps_raw.is_empty() {
            Vec::new()
        } else {
            steps_raw
                .split(',')
                .map(Step::from_str)
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::config("postprocess.steps", e))?
        };
        let dist = self.raw("merge.dist_thresh");
        let merge = MergeParams {
            max_gap: self.num("merge.max_gap")?,
            dist_thresh: if dist == "auto" { None } else { Some(self.num("merge.dist_thresh")?) },
            dist_height_factor: self.num("merge.dist_height_factor")?,
            area_ratio: self.num("merge.area_ratio")?,
            velocity_window: self.num("merge.velocity_window")?,
        };
        let postprocess = PostprocessParams {
            steps,
            max_gap: self.num("postprocess.max_gap")?,
            gsi_tau: self.num("gsi.tau")?,
            gsi_noise: self.num("gsi.noise")?,
            min_len: self.num("prune.min_len")?,
            merge,
        };
        if postprocess.max_gap < 1 || postprocess.min_len < 1 {
            return Err(Error::config("postprocess", "max_gap and prune.min_len must be >= 1"));
        }
        if !(postprocess.gsi_tau > 0.0 && postprocess.gsi_noise >= 0.0) {
            return Err(Error::config("gsi", "tau must be positive and noise nonnegative"));
        }

        let init_mean = self.list("search.init_mean")?;
        let dims = init_mean.len();
        let broadcast = |key: &str| -> Result<Vec<f64>> {
            let v = self.list(key)?;
            match v.len() {
                1 => Ok(vec![v[0]; dims]),
                n if n == dims => Ok(v),
                n => Err(Error::config(key, format!("{n} values for {dims} dimensions"))),
            }
        };
        let search = SearchConfig {
            rounds: self.num("search.rounds")?,
            steps_per_round: self.num("search.steps_per_round")?,
            samples_per_step: self.num("search.samples_per_step")?,
            std: self.num("search.std")?,
            bounds: broadcast("search.lower")?
                .into_iter()
                .zip(broadcast("search.upper")?)
                .collect(),
            init_mean,
            clip_epsilon: self.num("search.clip_epsilon")?,
            learning_rate: self.num("search.learning_rate")?,
            epochs: self.num("search.epochs")?,
            seed: self.num("search.seed")?,
        };
        search.validate().map_err(|e| Error::config("search", e.to_string()))?;

        let eval = EvalConfig {
            options: EvalOptions {
                iou_thresh: self.num("eval.iou_thresh")?,
                exclude_synthetic: self.flag("eval.exclude_synthetic")?,
            },
            visibility_thresh: self.num("eval.visibility_thresh")?,
            preprocess: self.flag("eval.preprocess")?,
        };

        let parse_scene = |key: &str| -> Result<SceneKind> {
            SceneKind::from_str(self.raw(key)).map_err(|e| Error::config(key, e))
        };
        let mut scenes = SceneConfig {
            default: parse_scene("scene.default")?,
            per_sequence: BTreeMap::new(),
        };
        for key in self.values.keys().filter(|k| is_scene_key(k) && *k != "scene.default") {
            scenes.per_sequence.insert(key["scene.".len()..].to_string(), parse_scene(key)?);
        }

        Ok(PipelineConfig {
            use_warps: self.flag("tracker.use_warps")?,
            tracker,
            fullbox,
            ensemble,
            postprocess,
            search,
            eval,
            scenes,
        })
    }

    /// The default configuration as a commented file.
    pub fn documented_defaults() -> String {
        let mut out = String::from("# trackkit configuration; every key is optional\n");
        let mut section = "";
        for k in KEYS {
            let s = k.key.split('.').next().unwrap_or("");
            if s != section {
                out.push('\n');
                section = s;
            }
            out.push_str(&format!("# {}\n{} = {}\n", k.doc, k.key, k.default));
        }
        out.push_str("# per-sequence scene kind, e.g.\n# scene.MOT17-05 = dynamic\n");
        out
    }
}

/// Parses a configuration file over the defaults.
pub fn load_config(text: &str) -> Result<Config> {
    Config::parse(text)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FullboxMode {
    Aspect,
    Height,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnchorChoice {
    Top,
    Bottom,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FullboxConfig {
    pub enabled: bool,
    pub mode: FullboxMode,
    pub aspect_ratio: f64,
    pub margin: f64,
    pub height_samples: Option<String>,
    pub anchor: AnchorChoice,
    pub sample_frame: u32,
    pub sample_min_score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub options: EvalOptions,
    pub visibility_thresh: f64,
    pub preprocess: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneConfig {
    pub default: SceneKind,
    pub per_sequence: BTreeMap<String, SceneKind>,
}

impl SceneConfig {
    pub fn kind(&self, sequence: &str) -> SceneKind {
        self.per_sequence.get(sequence).copied().unwrap_or(self.default)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tracker: TrackerConfig<f64>,
    pub use_warps: bool,
    pub fullbox: FullboxConfig,
    pub ensemble: WbfParams<f64>,
    pub postprocess: PostprocessParams<f64>,
    pub search: SearchConfig,
    pub eval: EvalConfig,
    pub scenes: SceneConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Config::default().pipeline().expect("built-in defaults are valid")
    }
}
