//! End-to-end runs driven by a JSON manifest.
//!
//! A manifest names a scheme, the seeds, sizes and solver settings, and
//! optional pass thresholds. [`run`] executes encode, measure, reconstruct,
//! reveal/decode and metrics, writes artifacts to the output directory if
//! one is given, and returns a [`Report`]. Identical manifests give
//! byte-identical reports and files: nothing depends on time, thread count
//! or map iteration order.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::imaging::{
    add_noise, generate_patterns, measure, measure_combined, BitMatrix, Image, MeasurementSeries,
    NoiseModel, PatternSequence, Scheme,
};
use crate::pnm;
use crate::qr::{qr_decode, qr_decode_gray, qr_encode, EcLevel};
use crate::reconstruct::metrics::{dot_accuracy, f1, psnr};
use crate::reconstruct::{reconstruct, Reconstruction, SolverConfig};
use crate::scenes::{self, ObjectKind};
use crate::threshold::ThresholdPolicy;
use crate::vc_opaque::{self, Assignment};
use crate::vc_patterns::{self, Which};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Seeds {
    /// Illumination patterns; the base sequence for pattern shares.
    pub pattern: u64,
    /// Key orientation for opaque shares.
    pub share: u64,
    /// Per-pattern orientation for pattern shares.
    pub orient: u64,
    /// Synthetic object generation.
    pub object: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source<K> {
    Builtin(K),
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Glyph {
    /// Integer magnification of the built-in "OK" glyph.
    pub scale: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QrSpec {
    pub text: String,
    pub version: u8,
    pub ec_level: EcLevel,
    #[serde(default)]
    pub mask: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Thresholds {
    pub min_psnr: Option<f64>,
    pub min_dot_accuracy: Option<f64>,
    pub min_f1: Option<f64>,
    pub require_decode: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub scheme: Scheme,
    /// Scene size; ignored for `opaque-qr`, where the symbol fixes it.
    #[serde(default)]
    pub width: usize,
    #[serde(default)]
    pub height: usize,
    pub n: usize,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub qr: Option<QrSpec>,
    #[serde(default)]
    pub secret: Option<Source<Glyph>>,
    #[serde(default)]
    pub object: Option<Source<ObjectKind>>,
    #[serde(default)]
    pub assignment: Assignment,
    /// Sequence used to reconstruct the combined pattern-share measurement.
    #[serde(default = "default_which")]
    pub reconstruct_with: Which,
    #[serde(default)]
    pub thresholds: Thresholds,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_which() -> Which {
    Which::A
}

impl RunManifest {
    pub fn from_json(s: &str) -> crate::Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub name: String,
    pub text: Option<String>,
    pub corrected_errors: Option<usize>,
    pub error: Option<String>,
}

impl DecodeReport {
    fn new(name: &str, result: crate::Result<crate::qr::Decoded>) -> Self {
        match result {
            Ok(d) => Self {
                name: name.into(),
                text: Some(d.text()),
                corrected_errors: Some(d.corrected_errors),
                error: None,
            },
            Err(e) => Self {
                name: name.into(),
                text: None,
                corrected_errors: None,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Report {
    pub scheme: Option<Scheme>,
    pub width: usize,
    pub height: usize,
    pub n: usize,
    pub sampling_ratio: f64,
    /// PSNR of the primary reconstruction against its ground truth; `"inf"`
    /// when they are identical.
    #[serde(with = "inf_f64", skip_serializing_if = "Option::is_none", default)]
    pub psnr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max_abs_error: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub decoded: Vec<DecodeReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub secret_dot_accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub secret_f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pattern_reveal_exact: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub budget: Option<vc_opaque::Budget>,
    pub solver_iterations: Vec<usize>,
    pub failures: Vec<String>,
    pub passed: bool,
}

impl Report {
    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Serializes non-finite values as the strings `"inf"`, `"-inf"`, `"nan"`,
/// which plain JSON cannot carry.
mod inf_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            None => s.serialize_none(),
            Some(x) if x.is_finite() => s.serialize_some(x),
            Some(x) if x.is_nan() => s.serialize_some("nan"),
            Some(x) if *x > 0.0 => s.serialize_some("inf"),
            Some(_) => s.serialize_some("-inf"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(match Option::<Repr>::deserialize(d)? {
            None => None,
            Some(Repr::Num(x)) => Some(x),
            Some(Repr::Text(t)) => Some(match t.as_str() {
                "inf" => f64::INFINITY,
                "-inf" => f64::NEG_INFINITY,
                "nan" => f64::NAN,
                _ => return Err(serde::de::Error::custom(format!("bad number {t:?}"))),
            }),
        })
    }
}

/// A failure tagged with the stage that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StageError {
    pub stage: &'static str,
    pub error: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.stage, self.error)
    }
}

impl std::error::Error for StageError {}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|error| StageError { stage, error })
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

struct Ctx<'a> {
    manifest: &'a RunManifest,
    base: &'a Path,
    out: Option<PathBuf>,
}

impl Ctx<'_> {
    fn secret(&self, w: usize, h: usize) -> Result<BitMatrix, StageError> {
        let m = match &self.manifest.secret {
            None => scenes::ok_glyph(w, h, 1),
            Some(Source::Builtin(g)) => scenes::ok_glyph(w, h, g.scale),
            Some(Source::File(p)) => pnm::load_pbm(resolve(self.base, p)),
        }
        .stage("secret")?;
        if m.dims() != (w, h) {
            return Err(StageError {
                stage: "secret",
                error: Error::DimensionMismatch {
                    expected: (w, h),
                    actual: m.dims(),
                },
            });
        }
        Ok(m)
    }

    fn object(&self, w: usize, h: usize) -> Result<Image, StageError> {
        let img = match &self.manifest.object {
            None => scenes::object(ObjectKind::Pepper, w, h, self.manifest.seeds.object),
            Some(Source::Builtin(k)) => scenes::object(*k, w, h, self.manifest.seeds.object),
            Some(Source::File(p)) => pnm::load_image(resolve(self.base, p)),
        }
        .stage("object")?;
        if img.dims() != (w, h) {
            return Err(StageError {
                stage: "object",
                error: Error::DimensionMismatch {
                    expected: (w, h),
                    actual: img.dims(),
                },
            });
        }
        Ok(img)
    }

    fn noisy(&self, s: MeasurementSeries) -> Result<MeasurementSeries, StageError> {
        add_noise(&s, &self.manifest.noise).stage("noise")
    }

    fn reconstruct(
        &self,
        s: &MeasurementSeries,
        p: &PatternSequence,
        cfg: &SolverConfig,
        iterations: &mut Vec<usize>,
    ) -> Result<Reconstruction, StageError> {
        let r = reconstruct(s, p, cfg).stage("reconstruct")?;
        iterations.push(r.iterations);
        Ok(r)
    }

    fn write_image(&self, name: &str, img: &Image) -> Result<(), StageError> {
        if let Some(dir) = &self.out {
            pnm::save_image(dir.join(format!("{name}.pgm")), img).stage("write")?;
        }
        Ok(())
    }

    fn write_bits(&self, name: &str, m: &BitMatrix) -> Result<(), StageError> {
        if let Some(dir) = &self.out {
            pnm::save_pbm(dir.join(format!("{name}.pbm")), m).stage("write")?;
        }
        Ok(())
    }

    fn write_series(&self, name: &str, s: &MeasurementSeries) -> Result<(), StageError> {
        if let Some(dir) = &self.out {
            std::fs::write(
                dir.join(format!("{name}.json")),
                s.to_json().stage("write")?,
            )
            .map_err(Error::from)
            .stage("write")?;
        }
        Ok(())
    }
}

/// Runs `manifest`, resolving relative paths against `base`. Threshold
/// misses are reported in [`Report::failures`], not as errors.
pub fn run(manifest: &RunManifest, base: &Path) -> Result<Report, StageError> {
    manifest.noise.validate().stage("manifest")?;
    manifest.solver.validate().stage("manifest")?;
    if manifest.n == 0 {
        return Err(StageError {
            stage: "manifest",
            error: Error::InvalidValue("n must be at least 1".into()),
        });
    }
    let out = manifest.output_dir.as_ref().map(|d| resolve(base, d));
    if let Some(dir) = &out {
        std::fs::create_dir_all(dir)
            .map_err(Error::from)
            .stage("write")?;
    }
    let ctx = Ctx {
        manifest,
        base,
        out,
    };
    let mut report = match manifest.scheme {
        Scheme::PlainSpi => run_plain(&ctx)?,
        Scheme::OpaqueQr => run_opaque(&ctx)?,
        Scheme::PatternShare => run_pattern(&ctx)?,
    };
    report.scheme = Some(manifest.scheme);
    report.n = manifest.n;
    report.sampling_ratio = manifest.n as f64 / (report.width * report.height) as f64;
    check_thresholds(&manifest.thresholds, &mut report);
    if let Some(dir) = &ctx.out {
        std::fs::write(dir.join("report.json"), report.to_json().stage("write")?)
            .map_err(Error::from)
            .stage("write")?;
    }
    Ok(report)
}

fn check_thresholds(t: &Thresholds, r: &mut Report) {
    let mut fail = |msg: String| r.failures.push(msg);
    if let Some(min) = t.min_psnr {
        match r.psnr {
            Some(v) if v >= min => {}
            v => fail(format!("psnr {v:?} below {min}")),
        }
    }
    if let Some(min) = t.min_dot_accuracy {
        match r.secret_dot_accuracy {
            Some(v) if v >= min => {}
            v => fail(format!("secret dot accuracy {v:?} below {min}")),
        }
    }
    if let Some(min) = t.min_f1 {
        match r.secret_f1 {
            Some(v) if v >= min => {}
            v => fail(format!("secret F1 {v:?} below {min}")),
        }
    }
    if t.require_decode {
        for d in &r.decoded {
            if d.text.is_none() {
                fail(format!("{} did not decode", d.name));
            }
        }
    }
    r.passed = r.failures.is_empty();
}

fn dims(m: &RunManifest) -> Result<(usize, usize), StageError> {
    if m.width == 0 || m.height == 0 {
        return Err(StageError {
            stage: "manifest",
            error: Error::InvalidDimensions("width and height are required".into()),
        });
    }
    Ok((m.width, m.height))
}

fn run_plain(ctx: &Ctx) -> Result<Report, StageError> {
    let m = ctx.manifest;
    let (w, h) = dims(m)?;
    let object = ctx.object(w, h)?;
    let p = generate_patterns(w, h, m.n, m.seeds.pattern).stage("patterns")?;
    let s = ctx.noisy(measure(&object, &p).stage("measure")?)?;
    ctx.write_series("series", &s)?;
    let mut iters = Vec::new();
    let r = ctx.reconstruct(&s, &p, &m.solver, &mut iters)?;
    ctx.write_image("reconstruction", &r.image)?;
    let max_abs = r
        .image
        .pixels()
        .iter()
        .zip(object.pixels())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(Report {
        width: w,
        height: h,
        psnr: Some(psnr(&r.image, &object).stage("metrics")?),
        max_abs_error: Some(max_abs),
        solver_iterations: iters,
        ..Report::default()
    })
}

fn run_opaque(ctx: &Ctx) -> Result<Report, StageError> {
    let m = ctx.manifest;
    let spec = m.qr.as_ref().ok_or_else(|| StageError {
        stage: "manifest",
        error: Error::InvalidValue("opaque-qr needs a qr section".into()),
    })?;
    let sym = qr_encode(spec.text.as_bytes(), spec.version, spec.ec_level, spec.mask)
        .stage("qr-encode")?;
    let (w, h) = sym.matrix.dims();
    let secret = ctx.secret(w, h)?;
    let budget = vc_opaque::modification_budget(&secret, &sym).stage("encode-shares")?;
    let pair = vc_opaque::encode_shares(&sym.matrix, &secret, m.seeds.share, m.assignment)
        .stage("encode-shares")?;
    ctx.write_bits("key1", &pair.key1)?;
    ctx.write_bits("key2", &pair.key2)?;

    let mut decoded = vec![
        DecodeReport::new("key1", qr_decode(&pair.key1)),
        DecodeReport::new("key2", qr_decode(&pair.key2)),
    ];

    let k1 = Image::from(&pair.key1);
    let k2 = Image::from(&pair.key2);
    let p = generate_patterns(w, h, m.n, m.seeds.pattern).stage("patterns")?;
    let mut iters = Vec::new();

    // each key imaged on its own, then read back as a QR code
    for (name, key) in [("key1-reconstructed", &k1), ("key2-reconstructed", &k2)] {
        let s = ctx.noisy(measure(key, &p).stage("measure")?)?;
        let r = ctx.reconstruct(&s, &p, &m.solver, &mut iters)?;
        ctx.write_image(name, &r.image)?;
        decoded.push(DecodeReport::new(
            name,
            qr_decode_gray(&r.image, ThresholdPolicy::Otsu),
        ));
    }

    let s = ctx.noisy(measure_combined(&[k1, k2], &[p.clone(), p.clone()]).stage("measure")?)?;
    ctx.write_series("series", &s)?;
    let r = ctx.reconstruct(&s, &p, &m.solver, &mut iters)?;
    ctx.write_image("overlay", &r.image)?;
    let truth = vc_opaque::overlay(&pair.key1, &pair.key2).stage("reveal")?;
    let rescaled = vc_opaque::rescale_overlay(&r.image).stage("reveal")?;
    let extracted = vc_opaque::extract_secret_from_overlay(&rescaled, vc_opaque::DEFAULT_TAU)
        .stage("reveal")?;
    ctx.write_bits("secret", &extracted)?;

    Ok(Report {
        width: w,
        height: h,
        psnr: Some(psnr(&rescaled, &truth).stage("metrics")?),
        decoded,
        secret_dot_accuracy: Some(dot_accuracy(&extracted, &secret).stage("metrics")?),
        secret_f1: Some(f1(&extracted, &secret).stage("metrics")?),
        budget: Some(budget),
        solver_iterations: iters,
        ..Report::default()
    })
}

fn run_pattern(ctx: &Ctx) -> Result<Report, StageError> {
    let m = ctx.manifest;
    let (w, h) = dims(m)?;
    let object = ctx.object(w, h)?;
    let secret = ctx.secret(w, h)?;
    let pair =
        vc_patterns::encode_pattern_shares(w, h, m.n, &secret, m.seeds.pattern, m.seeds.orient)
            .stage("encode-pattern-shares")?;
    let exact = vc_patterns::reveal_secret_from_patterns(&pair) == secret;

    let a = pair.sequence(Which::A);
    let b = pair.sequence(Which::B);
    let combined = ctx.noisy(
        measure_combined(&[object.clone(), object.clone()], &[a.clone(), b.clone()])
            .stage("measure")?,
    )?;
    let single = ctx.noisy(measure(&object, a).stage("measure")?)?;
    ctx.write_series("series-combined", &combined)?;
    ctx.write_series("series-single", &single)?;

    let mut iters = Vec::new();
    let rc = ctx.reconstruct(
        &combined,
        pair.sequence(m.reconstruct_with),
        &m.solver,
        &mut iters,
    )?;
    let rs = ctx.reconstruct(&single, a, &m.solver, &mut iters)?;
    ctx.write_image("combined", &rc.image)?;
    ctx.write_image("single", &rs.image)?;
    let revealed =
        vc_patterns::reveal_secret_from_reconstruction(&rc.image, &rs.image).stage("reveal")?;
    ctx.write_bits("secret", &revealed)?;

    Ok(Report {
        width: w,
        height: h,
        psnr: Some(psnr(&rs.image, &object).stage("metrics")?),
        secret_dot_accuracy: Some(dot_accuracy(&revealed, &secret).stage("metrics")?),
        secret_f1: Some(f1(&revealed, &secret).stage("metrics")?),
        pattern_reveal_exact: Some(exact),
        solver_iterations: iters,
        ..Report::default()
    })
}
