use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use regnets::analysis::{
    self, distance_function, evaluate_testset, rate_exponent, source_element, ExperimentReport, Reconstructor,
    SourceCondition,
};
use regnets::filters::{qualification_sup, verify_filter_axioms};
use regnets::io::{self, DataArray, ManifestEntry, Metadata};
use regnets::network::{NetworkArch, NetworkParams, TrainConfig};
use regnets::radon::{assemble_matrix, gen_phantom, relative_noise, PhantomSpec};
use regnets::regnet::{train_method, training_samples};
use regnets::{FilterRegularizer, ReconstructionMethod, RegNetFamily, RegularizingFilter, SvdOperator, Variant};

use crate::config::RunConfig;
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;
type Rows = Vec<Vec<f64>>;

fn at(path: &Path) -> impl Fn(regnets::Error) -> CliError + '_ {
    move |e| match CliError::from(e) {
        CliError::Io(m) => CliError::Io(format!("{}: {m}", path.display())),
        other => other,
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    io::write_bytes(path, text.as_bytes()).map_err(at(path))
}

fn header(meta: &Metadata) -> Vec<(String, String)> {
    meta.iter().map(|(k, v)| (k.clone(), v.clone())).collect()
}

const OPERATOR: &str = "operator.rgn1";
const TRAIN_PHANTOMS: &str = "train_phantoms.rgn1";
const TRAIN_SINOGRAMS: &str = "train_sinograms.rgn1";
const TEST_PHANTOMS: &str = "test_phantoms.rgn1";
const TEST_SINOGRAMS: &str = "test_sinograms.rgn1";

fn manifest_name(variant: Variant) -> String {
    format!("manifest_{variant}.txt")
}

fn load_operator(cfg: &RunConfig) -> Result<Arc<SvdOperator>> {
    let path = cfg.path(OPERATOR);
    let (op, _) = io::read_operator(&path).map_err(at(&path))?;
    let geom = cfg.geometry();
    if op.rows() != geom.rows() || op.cols() != geom.cols() {
        return Err(CliError::Usage(format!(
            "{} is {}x{} but the configured geometry needs {}x{}",
            path.display(),
            op.rows(),
            op.cols(),
            geom.rows(),
            geom.cols()
        )));
    }
    Ok(Arc::new(op))
}

fn load_rows(cfg: &RunConfig, name: &str, width: usize) -> Result<Rows> {
    let path = cfg.path(name);
    let (array, _) = io::read_array(&path).map_err(at(&path))?;
    if array.rows > 0 && array.cols != width {
        return Err(CliError::Usage(format!("{} has rows of length {}, expected {width}", path.display(), array.cols)));
    }
    Ok(array.values.chunks_exact(width.max(1)).map(<[f64]>::to_vec).take(array.rows).collect())
}

fn filter_for(cfg: &RunConfig, op: &SvdOperator) -> Result<RegularizingFilter> {
    Ok(RegularizingFilter::parse(&cfg.filter, op.sigma_max().powi(2))?)
}

fn arch(cfg: &RunConfig) -> Result<NetworkArch> {
    Ok(NetworkArch::with_channels(cfg.side, &cfg.hidden, cfg.residual)?)
}

pub fn assemble(cfg: &RunConfig) -> Result<String> {
    let geom = cfg.geometry();
    let matrix = assemble_matrix(&geom)?;
    let op = SvdOperator::decompose(matrix, geom.rows(), geom.cols(), cfg.rank_tol)?;
    let meta = cfg.metadata(&[
        ("kind", "operator".into()),
        ("side", geom.side.to_string()),
        ("angles", geom.angles.to_string()),
        ("detectors", geom.detectors.to_string()),
    ]);
    let path = cfg.path(OPERATOR);
    io::write_operator(&path, &op, &meta).map_err(at(&path))?;
    Ok(format!(
        "wrote {} ({}x{}, rank {}, sigma_max {:e})",
        path.display(),
        op.rows(),
        op.cols(),
        op.rank(),
        op.sigma_max()
    ))
}

pub fn phantoms(cfg: &RunConfig) -> Result<String> {
    let geom = cfg.geometry();
    let matrix = assemble_matrix(&geom)?;
    let spec = PhantomSpec::default();
    let mut report = String::new();
    for (split, count, phantom_file, sino_file) in [
        ("train", cfg.train_count, TRAIN_PHANTOMS, TRAIN_SINOGRAMS),
        ("test", cfg.test_count, TEST_PHANTOMS, TEST_SINOGRAMS),
    ] {
        let seed_of = |k| if split == "train" { cfg.train_phantom_seed(k) } else { cfg.test_phantom_seed(k) };
        let mut coeffs = Vec::with_capacity(count * geom.cols());
        let mut data = Vec::with_capacity(count * geom.rows());
        for k in 0..count {
            let p = gen_phantom(geom.side, seed_of(k), &spec)?;
            data.extend(
                matrix
                    .chunks_exact(geom.cols())
                    .map(|row| row.iter().zip(&p.coefficients).map(|(a, c)| a * c).sum::<f64>()),
            );
            coeffs.extend(p.coefficients);
        }
        let meta = cfg.metadata(&[("split", split.into()), ("phantom_seed_base", seed_of(0).to_string())]);
        let path = cfg.path(phantom_file);
        io::write_array(&path, &DataArray { rows: count, cols: geom.cols(), values: coeffs }, &meta)
            .map_err(at(&path))?;
        let path = cfg.path(sino_file);
        io::write_array(&path, &DataArray { rows: count, cols: geom.rows(), values: data }, &meta)
            .map_err(at(&path))?;
        let _ = writeln!(report, "{split}: {count} phantoms");
    }
    Ok(report.trim_end().to_string())
}

pub fn train(cfg: &RunConfig) -> Result<String> {
    let op = load_operator(cfg)?;
    let truths = load_rows(cfg, TRAIN_PHANTOMS, op.cols())?;
    let data = load_rows(cfg, TRAIN_SINOGRAMS, op.rows())?;
    if truths.len() != data.len() {
        return Err(CliError::Usage("training phantoms and sinograms differ in count".into()));
    }
    if truths.is_empty() {
        return Err(CliError::Usage("the training set is empty".into()));
    }
    let filter = filter_for(cfg, &op)?;
    let arch = arch(cfg)?;
    let train_cfg = TrainConfig {
        learning_rate: cfg.lr,
        momentum: cfg.momentum,
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        seed: cfg.shuffle_seed(),
        loss_scale: 1.0 / arch.pixels() as f64,
    };
    let mut report = String::new();
    for &variant in &cfg.variants {
        let mut entries = Vec::new();
        let mut log = String::new();
        for (i, alpha) in cfg.sorted_alphas().into_iter().enumerate() {
            let reg = FilterRegularizer::new(op.clone(), filter, alpha)?;
            let samples = training_samples(&reg, &data, &truths)?;
            let mut params = NetworkParams::init_zero_output(arch.clone(), cfg.init_seed(i))?;
            let history = train_method(variant, &reg, &mut params, &samples, &train_cfg, |epoch, loss| {
                eprintln!("{variant} alpha={alpha} epoch={} loss={}", epoch + 1, loss / arch.pixels() as f64);
            })?;
            for (epoch, loss) in history.iter().enumerate() {
                let _ = writeln!(
                    log,
                    "variant={variant} alpha={alpha} epoch={} loss={}",
                    epoch + 1,
                    loss / arch.pixels() as f64
                );
            }
            let rel = PathBuf::from("models").join(format!("{variant}_{i:02}.rgnn"));
            let meta = cfg.metadata(&[
                ("variant", variant.to_string()),
                ("alpha", alpha.to_string()),
                ("filter", filter.kind.to_string()),
                ("init_seed", cfg.init_seed(i).to_string()),
                ("shuffle_seed", cfg.shuffle_seed().to_string()),
            ]);
            let path = cfg.path(&rel.to_string_lossy());
            io::write_model(&path, &params, &meta).map_err(at(&path))?;
            entries.push(ManifestEntry { alpha, model: rel });
        }
        let meta = cfg.metadata(&[("variant", variant.to_string()), ("filter", filter.kind.to_string())]);
        write_text(&cfg.path(&manifest_name(variant)), &io::encode_manifest(&entries, &meta)?)?;
        let log_header: String = meta.iter().map(|(k, v)| format!("# {k}={v}\n")).collect();
        write_text(&cfg.path(&format!("train_{variant}.log")), &(log_header + &log))?;
        let _ = writeln!(report, "{variant}: {} models", entries.len());
    }
    Ok(report.trim_end().to_string())
}

fn load_family_methods(cfg: &RunConfig, op: &Arc<SvdOperator>, variant: Variant) -> Result<Vec<ReconstructionMethod>> {
    let manifest = cfg.path(&manifest_name(variant));
    let text = std::fs::read_to_string(&manifest).map_err(|e| CliError::Io(format!("{}: {e}", manifest.display())))?;
    let filter = filter_for(cfg, op)?;
    io::decode_manifest(&text)
        .map_err(at(&manifest))?
        .into_iter()
        .map(|entry| {
            let path = cfg.out.join(&entry.model);
            let (params, _) = io::read_model(&path).map_err(at(&path))?;
            let reg = FilterRegularizer::new(op.clone(), filter, entry.alpha)?;
            Ok(ReconstructionMethod::new(variant, reg, Some(params))?)
        })
        .collect()
}

fn classical_methods(cfg: &RunConfig, op: &Arc<SvdOperator>) -> Result<Vec<ReconstructionMethod>> {
    let filter = filter_for(cfg, op)?;
    cfg.sorted_alphas()
        .into_iter()
        .map(|a| Ok(ReconstructionMethod::classical(FilterRegularizer::new(op.clone(), filter, a)?)))
        .collect()
}

/// Classical methods followed by every trained variant, keyed by name.
fn all_methods(cfg: &RunConfig, op: &Arc<SvdOperator>) -> Result<Vec<(String, Vec<ReconstructionMethod>)>> {
    let mut out = vec![(cfg.filter.clone(), classical_methods(cfg, op)?)];
    for &v in &cfg.variants {
        out.push((v.to_string(), load_family_methods(cfg, op, v)?));
    }
    Ok(out)
}

fn as_dyn(methods: &[ReconstructionMethod]) -> Vec<&dyn Reconstructor> {
    methods.iter().map(|m| m as &dyn Reconstructor).collect()
}

fn load_testset(cfg: &RunConfig, op: &SvdOperator) -> Result<(Rows, Rows)> {
    let truths = load_rows(cfg, TEST_PHANTOMS, op.cols())?;
    let data = load_rows(cfg, TEST_SINOGRAMS, op.rows())?;
    if truths.len() != data.len() {
        return Err(CliError::Usage("test phantoms and sinograms differ in count".into()));
    }
    Ok((truths, data))
}

pub fn evaluate(cfg: &RunConfig) -> Result<String> {
    let op = load_operator(cfg)?;
    let (truths, data) = load_testset(cfg, &op)?;
    let methods = all_methods(cfg, &op)?;
    let meta = cfg.metadata(&[("noise_seed", cfg.noise_seed().to_string()), ("test_count", truths.len().to_string())]);
    let mut summary: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    for &delta in &cfg.deltas {
        for (name, family) in &methods {
            let report = evaluate_testset(&as_dyn(family), &truths, &data, delta, cfg.noise_seed())?;
            write_text(&cfg.path(&format!("eval_{name}_delta{delta}.csv")), &report.alpha_csv(&header(&meta)))?;
            if let Some(best) = report.best() {
                let _ = writeln!(
                    summary,
                    "delta={delta} method={name} best_alpha={} best_mse={} best_mae={}",
                    best.alpha, best.mse, best.mae
                );
            }
        }
    }
    write_text(&cfg.path("evaluate_summary.txt"), &summary)?;
    Ok(summary.lines().filter(|l| l.starts_with("delta=")).collect::<Vec<_>>().join("\n"))
}

pub fn reconstruct(cfg: &RunConfig) -> Result<String> {
    let op = load_operator(cfg)?;
    let (truths, data) = load_testset(cfg, &op)?;
    if cfg.image >= truths.len() {
        return Err(CliError::Usage(format!("image {} is outside the test set of {}", cfg.image, truths.len())));
    }
    let n_val = cfg.validation_count.clamp(1, truths.len());
    let methods = all_methods(cfg, &op)?;
    let meta = cfg.metadata(&[
        ("noise_seed", cfg.noise_seed().to_string()),
        ("image", cfg.image.to_string()),
        ("validation_count", n_val.to_string()),
    ]);
    let truth = &truths[cfg.image];
    io::write_pgm(&cfg.path("recon/truth.pgm"), truth, cfg.side, &meta).map_err(CliError::from)?;
    let mut summary: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    for &delta in &cfg.deltas {
        // same noise realization as the test-set evaluation
        let y = relative_noise(&data[cfg.image], delta, cfg.noise_seed().wrapping_add(cfg.image as u64))?;
        for (name, family) in &methods {
            let val = evaluate_testset(&as_dyn(family), &truths[..n_val], &data[..n_val], delta, cfg.noise_seed())?;
            let best = val.best().ok_or_else(|| CliError::Usage(format!("no alphas for {name}")))?;
            let method = family.iter().find(|m| m.alpha() == best.alpha).expect("best alpha comes from the family");
            let recon = method.reconstruct(&y)?;
            let (mse, mae) = analysis::image_errors(&recon, truth)?;
            let path = cfg.path(&format!("recon/delta{delta}_{name}.pgm"));
            let mut pgm_meta = meta.clone();
            pgm_meta.insert("alpha".into(), best.alpha.to_string());
            pgm_meta.insert("method".into(), name.clone());
            pgm_meta.insert("delta".into(), delta.to_string());
            io::write_pgm(&path, &recon, cfg.side, &pgm_meta).map_err(at(&path))?;
            let _ = writeln!(summary, "delta={delta} method={name} alpha={} mse={mse} mae={mae}", best.alpha);
        }
    }
    write_text(&cfg.path("recon/summary.txt"), &summary)?;
    Ok(summary.lines().filter(|l| l.starts_with("delta=")).collect::<Vec<_>>().join("\n"))
}

pub fn rates(cfg: &RunConfig) -> Result<String> {
    let sc = SourceCondition::new(cfg.mu, cfg.rho)?;
    let kind = RegularizingFilter::parse(&cfg.filter, 1.0)?;
    if kind.qualification_constant(cfg.mu).is_none() {
        return Err(CliError::Usage(format!("filter {} has qualification below mu = {}", kind.kind, cfg.mu)));
    }
    let op = load_operator(cfg)?;
    let filter = filter_for(cfg, &op)?;
    let x = source_element(&op, sc, cfg.seed)?;
    let method_for =
        |alpha: f64| Ok(ReconstructionMethod::classical(FilterRegularizer::new(op.clone(), filter, alpha)?));
    let report: ExperimentReport =
        analysis::rate_experiment(&method_for, &op, &x, sc, cfg.rate_scale, &cfg.rate_deltas, cfg.noise_seed())?;
    let meta = cfg.metadata(&[
        ("noise_seed", cfg.noise_seed().to_string()),
        ("mu", cfg.mu.to_string()),
        ("rho", cfg.rho.to_string()),
        ("filter", filter.kind.to_string()),
    ]);
    let stem = format!("rates_{}_mu{}", filter.kind, cfg.mu);
    write_text(&cfg.path(&format!("{stem}.csv")), &report.rate_csv(&header(&meta)))?;
    let summary = report.slope_summary(&header(&meta), Some(rate_exponent(cfg.mu)));
    write_text(&cfg.path(&format!("{stem}_slope.txt")), &summary)?;
    let slope = report.slope.map(|f| f.slope).unwrap_or(f64::NAN);
    Ok(format!("slope={slope} expected={}", rate_exponent(cfg.mu)))
}

pub fn distfn(cfg: &RunConfig) -> Result<String> {
    let op = load_operator(cfg)?;
    let (truths, _) = load_testset(cfg, &op)?;
    let variant = cfg.distfn_variant;
    let methods = load_family_methods(cfg, &op, variant)?;
    let members = methods.iter().map(|m| (m.alpha(), m.params().expect("learned").clone())).collect();
    let family = RegNetFamily::new(op.clone(), filter_for(cfg, &op)?, variant, members, cfg.lipschitz_cap)?;
    let sc = SourceCondition::new(cfg.mu, cfg.rho)?;
    let probes = &truths[..cfg.validation_count.min(truths.len())];
    if probes.is_empty() {
        return Err(CliError::Usage("no test images to probe".into()));
    }
    let meta =
        cfg.metadata(&[("variant", variant.to_string()), ("mu", cfg.mu.to_string()), ("rho", cfg.rho.to_string())]);
    let mut text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    for (i, lip) in family.lipschitz_bounds().iter().enumerate() {
        let method = family.method(i)?;
        let mut total = 0.0;
        for x in probes {
            total += distance_function(&method, x, sc)?;
        }
        let _ =
            writeln!(text, "alpha={} mean_distance={} lipschitz={lip}", method.alpha(), total / probes.len() as f64);
    }
    write_text(&cfg.path(&format!("distfn_{variant}.txt")), &text)?;
    Ok(text.lines().filter(|l| l.starts_with("alpha=")).collect::<Vec<_>>().join("\n"))
}

pub fn checkfilter(cfg: &RunConfig) -> Result<String> {
    let filter = RegularizingFilter::parse(&cfg.filter, 1.0)?;
    let alphas = [1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6];
    let axioms = verify_filter_axioms(&filter, 1.0, &alphas)?;
    let meta = cfg.metadata(&[("filter", filter.kind.to_string()), ("mu", cfg.mu.to_string())]);
    let mut text: String = meta.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    let _ = writeln!(text, "sup_lambda_g={}", axioms.sup_lambda_g);
    let _ = writeln!(text, "bounded={}", axioms.bounded);
    let _ = writeln!(text, "converges={}", axioms.converges);
    let mut qualified = true;
    if let Some(c) = filter.qualification_constant(cfg.mu) {
        for &a in &alphas {
            let sup = qualification_sup(&filter, a, cfg.mu, 1.0, 100_000)?;
            let ok = sup <= c * a.powf(cfg.mu) * (1.0 + 1e-3);
            qualified &= ok;
            let _ = writeln!(text, "alpha={a} qualification_sup={sup} bound={}", c * a.powf(cfg.mu));
        }
    } else {
        let _ = writeln!(text, "qualification=exceeded");
    }
    let passed = axioms.passed() && qualified;
    let _ = writeln!(text, "passed={passed}");
    write_text(&cfg.path(&format!("checkfilter_{}.txt", filter.kind)), &text)?;
    if !passed {
        return Err(CliError::Numeric(format!("filter {} failed its checks", filter.kind)));
    }
    Ok(format!("filter {} passed", filter.kind))
}
