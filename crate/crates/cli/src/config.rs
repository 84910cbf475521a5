//! `key=value` run configuration with flag overrides.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use regnets::io::Metadata;
use regnets::radon::RadonGeometry;
use regnets::Variant;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub side: usize,
    pub angles: usize,
    pub detectors: usize,
    pub rank_tol: f64,
    pub filter: String,
    pub alphas: Vec<f64>,
    pub deltas: Vec<f64>,
    pub variants: Vec<Variant>,
    pub hidden: Vec<usize>,
    pub residual: bool,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub train_count: usize,
    pub test_count: usize,
    pub validation_count: usize,
    pub seed: u64,
    pub image: usize,
    pub mu: f64,
    pub rho: f64,
    pub rate_scale: f64,
    pub rate_deltas: Vec<f64>,
    pub distfn_variant: Variant,
    pub lipschitz_cap: f64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            side: 64,
            angles: 15,
            detectors: 64,
            rank_tol: regnets::linop::DEFAULT_RANK_TOL,
            filter: "tsvd".into(),
            alphas: vec![0.4, 0.3, 0.25, 0.2, 0.15],
            deltas: vec![0.02, 0.05],
            variants: vec![Variant::NullSpace, Variant::ContinuedSvd],
            hidden: vec![16, 16],
            residual: false,
            lr: 0.05,
            momentum: 0.99,
            epochs: 5,
            batch_size: 10,
            train_count: 200,
            test_count: 50,
            validation_count: 10,
            seed: 1,
            image: 0,
            mu: 0.5,
            rho: 1.0,
            rate_scale: 1.0,
            rate_deltas: vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6, 1e-6],
            distfn_variant: Variant::ContinuedSvd,
            lipschitz_cap: 1e6,
            out: PathBuf::from("run"),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, CliError> {
    v.trim().parse().map_err(|_| usage(format!("bad value for {key}: {v:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>, CliError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|item| parse_num(key, item)).collect()
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "side" => self.side = parse_num(key, v)?,
            "angles" => self.angles = parse_num(key, v)?,
            "detectors" => self.detectors = parse_num(key, v)?,
            "rank_tol" => self.rank_tol = parse_num(key, v)?,
            "filter" => self.filter = v.to_string(),
            "alphas" => self.alphas = parse_list(key, v)?,
            "deltas" => self.deltas = parse_list(key, v)?,
            "variants" => {
                self.variants = v
                    .split(',')
                    .map(|s| s.trim().parse::<Variant>().map_err(|e| usage(e.to_string())))
                    .collect::<Result<_, _>>()?
            }
            "hidden" => self.hidden = parse_list(key, v)?,
            "residual" => self.residual = parse_num(key, v)?,
            "lr" => self.lr = parse_num(key, v)?,
            "momentum" => self.momentum = parse_num(key, v)?,
            "epochs" => self.epochs = parse_num(key, v)?,
            "batch_size" => self.batch_size = parse_num(key, v)?,
            "train_count" => self.train_count = parse_num(key, v)?,
            "test_count" => self.test_count = parse_num(key, v)?,
            "validation_count" => self.validation_count = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "image" => self.image = parse_num(key, v)?,
            "mu" => self.mu = parse_num(key, v)?,
            "rho" => self.rho = parse_num(key, v)?,
            "rate_scale" => self.rate_scale = parse_num(key, v)?,
            "rate_deltas" => self.rate_deltas = parse_list(key, v)?,
            "distfn_variant" => self.distfn_variant = v.parse().map_err(|e: regnets::Error| usage(e.to_string()))?,
            "lipschitz_cap" => self.lipschitz_cap = parse_num(key, v)?,
            "out" => self.out = PathBuf::from(v),
            _ => return Err(usage(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Applies every `key=value` line of a config file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| usage(format!("config line {}: expected key=value", n + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    /// Full-size geometry and dataset of the original experiments.
    pub fn apply_paper_scale(&mut self) {
        self.side = 128;
        self.angles = 30;
        self.detectors = 200;
        self.train_count = 1000;
        self.test_count = 250;
        self.alphas = (0..15).map(|i| 0.6 * (0.05f64 / 0.6).powf(i as f64 / 14.0)).collect();
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.geometry().validate().map_err(|e| usage(e.to_string()))?;
        if !(self.rank_tol > 0.0 && self.rank_tol < 1.0) {
            return Err(usage("rank_tol must lie in (0, 1)"));
        }
        if self.alphas.iter().any(|&a| !(a > 0.0 && a.is_finite())) {
            return Err(usage("alphas must be positive"));
        }
        if self.deltas.iter().chain(&self.rate_deltas).any(|&d| !(d >= 0.0 && d.is_finite())) {
            return Err(usage("noise levels must be non-negative"));
        }
        if self.variants.iter().any(|v| !v.is_learned()) || !self.distfn_variant.is_learned() {
            return Err(usage("only learned variants (nullspace, continued) can be trained"));
        }
        Ok(())
    }

    pub fn geometry(&self) -> RadonGeometry {
        RadonGeometry::new(self.side, self.angles, self.detectors)
    }

    /// Alphas in descending order without duplicates.
    pub fn sorted_alphas(&self) -> Vec<f64> {
        let mut a = self.alphas.clone();
        a.sort_by(|x, y| y.total_cmp(x));
        a.dedup();
        a
    }

    /// Sorted `key=value` lines of every setting except the output directory.
    pub fn canonical(&self) -> String {
        let variants: Vec<&str> = self.variants.iter().map(|v| v.name()).collect();
        let entries = [
            ("alphas", join(&self.alphas)),
            ("angles", self.angles.to_string()),
            ("batch_size", self.batch_size.to_string()),
            ("deltas", join(&self.deltas)),
            ("detectors", self.detectors.to_string()),
            ("distfn_variant", self.distfn_variant.name().to_string()),
            ("epochs", self.epochs.to_string()),
            ("filter", self.filter.clone()),
            ("hidden", join(&self.hidden)),
            ("image", self.image.to_string()),
            ("lipschitz_cap", self.lipschitz_cap.to_string()),
            ("lr", self.lr.to_string()),
            ("momentum", self.momentum.to_string()),
            ("mu", self.mu.to_string()),
            ("rank_tol", self.rank_tol.to_string()),
            ("rate_deltas", join(&self.rate_deltas)),
            ("rate_scale", self.rate_scale.to_string()),
            ("residual", self.residual.to_string()),
            ("rho", self.rho.to_string()),
            ("seed", self.seed.to_string()),
            ("side", self.side.to_string()),
            ("test_count", self.test_count.to_string()),
            ("train_count", self.train_count.to_string()),
            ("validation_count", self.validation_count.to_string()),
            ("variants", variants.join(",")),
        ];
        let mut out = String::new();
        for (k, v) in entries {
            let _ = writeln!(out, "{k}={v}");
        }
        out
    }

    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Provenance block embedded in every artifact.
    pub fn metadata(&self, extra: &[(&str, String)]) -> Metadata {
        let mut m = Metadata::new();
        m.insert("config_hash".into(), self.hash());
        m.insert("seed".into(), self.seed.to_string());
        for (k, v) in extra {
            m.insert((*k).into(), v.clone());
        }
        m
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn train_phantom_seed(&self, k: usize) -> u64 {
        (self.seed << 32).wrapping_add(k as u64)
    }

    /// Test seeds start half-way through the same 2^32 block, so splits never overlap.
    pub fn test_phantom_seed(&self, k: usize) -> u64 {
        (self.seed << 32).wrapping_add(1 << 31).wrapping_add(k as u64)
    }

    pub fn init_seed(&self, alpha_index: usize) -> u64 {
        self.seed.wrapping_mul(1_000_003).wrapping_add(alpha_index as u64)
    }

    pub fn shuffle_seed(&self) -> u64 {
        self.seed ^ 0x5348_5546
    }

    pub fn noise_seed(&self) -> u64 {
        self.seed ^ 0x4e4f_4953_4500
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_override() {
        let mut c = RunConfig::default();
        c.apply_text("# comment\nside = 16\nalphas=0.5,0.1 # inline\nvariants=continued\n").unwrap();
        assert_eq!(c.side, 16);
        assert_eq!(c.alphas, vec![0.5, 0.1]);
        assert_eq!(c.variants, vec![Variant::ContinuedSvd]);
        assert!(matches!(c.apply_text("nonsense=1"), Err(CliError::Usage(_))));
        assert!(matches!(c.apply_text("side"), Err(CliError::Usage(_))));
        assert!(matches!(c.apply_text("side=x"), Err(CliError::Usage(_))));
    }

    #[test]
    fn hash_tracks_every_setting() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.set("epochs", "6").unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        assert_eq!(a.canonical().lines().count(), 25);
    }

    #[test]
    fn phantom_seed_ranges_are_disjoint() {
        let c = RunConfig::default();
        assert!(c.train_phantom_seed(1000) < c.test_phantom_seed(0));
    }

    #[test]
    fn paper_scale_preset() {
        let mut c = RunConfig::default();
        c.apply_paper_scale();
        assert_eq!(c.geometry().rows(), 6000);
        assert_eq!(c.geometry().cols(), 16384);
        assert_eq!(c.alphas.len(), 15);
        assert_eq!((c.train_count, c.test_count), (1000, 250));
    }
}
