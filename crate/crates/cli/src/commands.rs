use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use ptycho_core::ambiguity::{
    apply_params, apply_scaling, ex0_object, ex31_object, example_grid, example_scheme, translate_pair_ex31,
    twin_pair_ex0, verify_equivalence, AmbiguityParams, Ex31Variant, SolutionPair,
};
use ptycho_core::analysis::{aligned_error, block_phase_profile, block_phases, phase_drift};
use ptycho_core::constraints::{
    check_mpc, check_osc, tight_hull_anchors, MpcParams, MpcReport, OscParams, SUPPORT_REL_THRESHOLD,
};
use ptycho_core::field::{read_cf64, restrict_at, write_cf64};
use ptycho_core::forward::{acquire, read_dataset, write_dataset, DatasetMeta, StoredDataset};
use ptycho_core::rng::{random_object, random_phase_mask, MaskSpec};
use ptycho_core::scheme::{
    certify_mixing, connectivity, perturbation_margins, MixingOptions, ScanScheme,
};
use ptycho_core::{Boundary, GridSpec, PixelSet, Point, PtychoError, Rect, Shift};

use crate::{
    AmbiguityArgs, AmbiguityKind, AnalyzeArgs, BoundaryArg, CheckArgs, Failure, Fixture, GenArgs, MpcArgs, OscArgs,
    SchemeArgs,
};

pub const SCHEMA_VERSION: u32 = 1;

type CmdResult = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> CmdResult {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(path) = out {
        if let Some(dir) = path.parent() {
            if !dir.as_os_str().is_empty() {
                fs::create_dir_all(dir)?;
            }
        }
        fs::write(path, &text)?;
    }
    println!("{text}");
    Ok(())
}

fn boundary(b: BoundaryArg) -> Boundary {
    match b {
        BoundaryArg::Torus => Boundary::Torus,
        BoundaryArg::Dirichlet => Boundary::DirichletZero,
    }
}

fn parse_points(s: &str) -> Result<Vec<Point>, Failure> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            let v: Vec<&str> = p.split(',').map(str::trim).collect();
            match v.as_slice() {
                [a, b] => Ok([
                    a.parse().map_err(|_| usage(format!("bad coordinate {a:?}")))?,
                    b.parse().map_err(|_| usage(format!("bad coordinate {b:?}")))?,
                ]),
                _ => Err(usage(format!("expected \"k1,k2\", got {p:?}"))),
            }
        })
        .collect()
}

fn parse_pair(s: &str) -> Result<[f64; 2], Failure> {
    let v: Vec<&str> = s.split(',').map(str::trim).collect();
    match v.as_slice() {
        [a, b] => Ok([
            a.parse().map_err(|_| usage(format!("bad number {a:?}")))?,
            b.parse().map_err(|_| usage(format!("bad number {b:?}")))?,
        ]),
        _ => Err(usage(format!("expected \"x,y\", got {s:?}"))),
    }
}

fn grid_of(a: &SchemeArgs) -> Result<GridSpec, Failure> {
    let n = a.n.ok_or_else(|| usage("--n is required"))?;
    let m = a.m.ok_or_else(|| usage("--m is required"))?;
    Ok(GridSpec::new(n, m, boundary(a.boundary))?)
}

pub fn build_scheme(a: &SchemeArgs) -> Result<ScanScheme, Failure> {
    if let Some(path) = &a.scheme {
        return Ok(ScanScheme::read_json(path)?);
    }
    let grid = grid_of(a)?;
    if let Some(tau) = a.raster_tau {
        return Ok(ScanScheme::raster(grid, tau)?);
    }
    if let Some(tau) = a.perturbed_tau {
        let d1 = a.delta1.clone().unwrap_or_default();
        let d2 = a.delta2.clone().unwrap_or_default();
        return Ok(ScanScheme::perturbed_raster(grid, tau, d1, d2)?);
    }
    if let Some(s) = &a.shifts {
        let shifts = parse_points(s)?.into_iter().map(Shift).collect();
        return Ok(ScanScheme::new(grid, shifts)?);
    }
    Err(usage("no scheme given: use --raster-tau, --perturbed-tau, --shifts or --scheme"))
}

pub fn gen(a: &GenArgs) -> CmdResult {
    let object_seed = a.object_seed.unwrap_or(a.seed.wrapping_add(1));
    let (scheme, object, note) = match a.fixture {
        Some(fx) => {
            let m = a.scheme.m.ok_or_else(|| usage("--fixture needs --m"))?;
            if a.periodic && fx == Fixture::Ex31 {
                return Err(usage("the translate example has no periodic variant"));
            }
            let grid = example_grid(m, a.periodic, boundary(a.scheme.boundary))?;
            if let Some(n) = a.scheme.n {
                if n != grid.n {
                    return Err(usage(format!("fixture geometry has n = {}, got --n {n}", grid.n)));
                }
            }
            let scheme = example_scheme(grid)?;
            let (object, name) = match fx {
                Fixture::Ex0 => (ex0_object(&grid, object_seed), "ex0"),
                Fixture::Ex31 => (ex31_object(&grid, object_seed), "ex31"),
            };
            (scheme, object, Some(format!("fixture {name}")))
        }
        None => {
            let scheme = build_scheme(&a.scheme)?;
            let n = scheme.grid().n;
            let object = match &a.object {
                Some(path) => {
                    let (f, _) = read_cf64(path)?;
                    if f.height() != n || f.width() != n {
                        return Err(usage(format!("object is {}x{}, scheme needs {n}x{n}", f.height(), f.width())));
                    }
                    f
                }
                None => random_object(n, object_seed),
            };
            (scheme, object, None)
        }
    };
    let spec = MaskSpec::unimodular(scheme.grid().m, a.gamma, a.seed);
    let mask = random_phase_mask(&spec)?;
    let mut data = acquire(&scheme, &mask, &object)?;
    data.meta = DatasetMeta {
        gamma: Some(a.gamma),
        mask_seed: Some(a.seed),
        object_seed: a.object.is_none().then_some(object_seed),
        phase_density: Some("uniform".into()),
        note,
    };
    write_dataset(&a.out, &data, &mask, &object)?;
    info!("wrote {} patterns to {}", data.len(), a.out.display());
    emit(
        &json!({
            "schema_version": SCHEMA_VERSION,
            "out": a.out,
            "n": scheme.grid().n,
            "m": scheme.grid().m,
            "boundary": scheme.grid().boundary,
            "shifts": scheme.len(),
            "pattern_side": 2 * scheme.grid().m - 1,
        }),
        None,
    )
}

fn union_of_blocks(scheme: &ScanScheme) -> Result<PixelSet, Failure> {
    let mut u = PixelSet::empty(*scheme.grid());
    for b in scheme.blocks()? {
        u = u.union(&b);
    }
    Ok(u)
}

pub fn check_scheme(a: &CheckArgs) -> CmdResult {
    let (scheme, mut object) = match &a.dataset {
        Some(dir) => {
            let st = read_dataset(dir)?;
            (st.data.scheme, Some(st.object))
        }
        None => (build_scheme(&a.scheme)?, None),
    };
    if let Some(path) = &a.object {
        object = Some(read_cf64(path)?.0);
    }
    let grid = *scheme.grid();
    let union = union_of_blocks(&scheme)?;
    let support = match &object {
        Some(f) => f.support(&grid, SUPPORT_REL_THRESHOLD * f.max_abs())?.intersection(&union),
        None => union,
    };
    let conn = connectivity(&scheme, &support)?;

    let mixing: Value = if grid.boundary == Boundary::Torus {
        let opts = MixingOptions { max_p: a.max_p, neighborhood_radius: a.radius, ..MixingOptions::default() };
        serde_json::to_value(certify_mixing(&scheme, &opts)?)?
    } else {
        json!({ "status": "not-applicable", "note": "mixing is defined on the torus only" })
    };
    let certified = mixing.get("status").and_then(Value::as_str) == Some("certified");
    let margins = match scheme.raster_params() {
        Some(_) if grid.boundary == Boundary::Torus => Some(perturbation_margins(&scheme)?),
        _ => None,
    };
    let anchors = match &object {
        Some(f) => json!(tight_hull_anchors(&scheme, f, SUPPORT_REL_THRESHOLD)?),
        None => Value::Null,
    };
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "grid": grid,
        "shifts": scheme.len(),
        "connectivity": {
            "support_size": support.len(),
            "strength": conn.strength,
            "edges": conn.edge_overlaps.len(),
        },
        "mixing": mixing,
        "margins": margins,
        "anchors": anchors,
    });
    emit(&report, a.out.as_deref())?;
    if a.require_mixing && !certified {
        return Err(Failure::Property("scheme is not certified mixing".into()));
    }
    Ok(())
}

/// Nearest point of `(2π/n) Z^2`.
fn snap_to_lattice(w: [f64; 2], n: usize) -> [f64; 2] {
    let step = 2.0 * PI / n as f64;
    [(w[0] / step).round() * step, (w[1] / step).round() * step]
}

fn gamma_of(st: &StoredDataset, flag: Option<f64>) -> f64 {
    flag.or(st.data.meta.gamma).unwrap_or(1.0)
}

fn default_mpc(gamma: f64, delta: Option<f64>) -> Result<MpcParams, Failure> {
    let delta = delta.unwrap_or(0.8 * gamma.min(0.5));
    Ok(MpcParams::new(delta, gamma)?)
}

fn write_pair(dir: &Path, pair: &SolutionPair) -> CmdResult {
    fs::create_dir_all(dir)?;
    write_cf64(&dir.join("object.cf64"), &pair.object, "object")?;
    write_cf64(&dir.join("mask.cf64"), &pair.mask, "mask")?;
    Ok(())
}

pub fn ambiguity(a: &AmbiguityArgs) -> CmdResult {
    if !(a.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let st = read_dataset(&a.dataset)?;
    let (f, mu, scheme) = (&st.object, &st.mask, &st.data.scheme);
    let grid = *scheme.grid();
    let mut notes: Vec<String> = Vec::new();
    let mut extra = serde_json::Map::new();
    let mut params = AmbiguityParams { c: a.c, a: a.a, b: a.b, w: parse_pair(&a.w)?, theta: Vec::new() };

    let pair = match a.kind {
        AmbiguityKind::Scaling => apply_scaling(f, mu, a.c)?,
        AmbiguityKind::Affine => {
            if grid.boundary == Boundary::Torus {
                let snapped = snap_to_lattice(params.w, grid.n);
                if snapped != params.w {
                    notes.push(format!("w snapped to the torus lattice (2π/{})Z^2: {:?}", grid.n, snapped));
                    params.w = snapped;
                }
            }
            apply_params(f, mu, &params)?
        }
        AmbiguityKind::Ex0 => {
            let pair = twin_pair_ex0(f, mu, scheme)?;
            let rep = check_mpc(&pair.mask, mu, default_mpc(gamma_of(&st, None), None)?)?;
            if !rep.pass {
                notes.push("mask estimate violates the mask phase constraint".into());
            }
            extra.insert("mpc".into(), serde_json::to_value(rep)?);
            pair
        }
        AmbiguityKind::Ex31 | AmbiguityKind::Ex31Twin => {
            let variant = if a.kind == AmbiguityKind::Ex31 { Ex31Variant::Translate } else { Ex31Variant::TwinLike };
            let pair = translate_pair_ex31(f, mu, scheme, variant)?;
            let f0 = restrict_at(f, &grid, Shift::ZERO)?;
            let g0 = restrict_at(&pair.object, &grid, Shift::ZERO)?;
            let fbox = OscParams::from_object_block(&f0, vec![Shift::ZERO], SUPPORT_REL_THRESHOLD * f0.max_abs())?.fbox;
            let half = grid.m as i64 / 2;
            let loose = check_osc(&g0, &OscParams::row_shifts(half, fbox))?;
            let mut osc = json!({ "t0_rows": half, "loose": loose });
            if let Some(l) = a.t0_tighten {
                if l < 0 || l > half {
                    return Err(usage(format!("--t0-tighten must lie in [0, {half}]")));
                }
                let tight = check_osc(&g0, &OscParams::row_shifts(half - l, fbox))?;
                if !tight.pass {
                    notes.push(format!(
                        "object estimate violates the support constraint with T0 tightened by {l}: offender {:?}",
                        tight.offender.map(|s| s.0)
                    ));
                }
                osc["tightened"] = serde_json::to_value(tight)?;
            }
            extra.insert("osc".into(), osc);
            pair
        }
    };
    let verify = verify_equivalence(&pair, f, mu, scheme, a.tol)?;
    write_pair(&a.out, &pair)?;
    let mut report = json!({
        "schema_version": SCHEMA_VERSION,
        "kind": format!("{:?}", a.kind).to_lowercase().replace("ex31twin", "ex31-twin"),
        "params": params,
        "verify": verify,
        "notes": notes,
    });
    for (k, v) in extra {
        report[k] = v;
    }
    emit(&report, Some(&a.out.join("report.json")))
}

fn read_pair(dir: &Path) -> Result<SolutionPair, Failure> {
    let (object, _) = read_cf64(&dir.join("object.cf64"))?;
    let (mask, _) = read_cf64(&dir.join("mask.cf64"))?;
    Ok(SolutionPair { object, mask })
}

pub fn analyze(a: &AnalyzeArgs) -> CmdResult {
    if !(a.tol > 0.0) {
        return Err(usage("--tol must be positive"));
    }
    let st = read_dataset(&a.dataset)?;
    let pair = read_pair(&a.candidate)?;
    let (f, mu, scheme) = (&st.object, &st.mask, &st.data.scheme);
    if pair.object.data().dim() != f.data().dim() || pair.mask.data().dim() != mu.data().dim() {
        return Err(PtychoError::Shape("candidate and ground truth shapes differ".into()).into());
    }
    let mut notes: Vec<String> = Vec::new();
    let verify = verify_equivalence(&pair, f, mu, scheme, a.tol)?;
    let (profile, residuals, drift) = match block_phases(&pair, f, mu, scheme) {
        Ok(bp) => {
            let profile = block_phase_profile(&bp.theta, scheme)?;
            let drift = phase_drift(&bp.theta, scheme)?;
            (Some(profile), bp.residuals, drift)
        }
        Err(PtychoError::ZeroBlock { index }) => {
            notes.push(format!("masked block {index} is zero; block phases undefined"));
            (None, Vec::new(), Vec::new())
        }
        Err(e) => return Err(e.into()),
    };
    let mpc: MpcReport = check_mpc(&pair.mask, mu, default_mpc(gamma_of(&st, a.gamma), a.delta)?)?;
    if !mpc.pass {
        notes.push("mask estimate violates the mask phase constraint".into());
    }
    let report = json!({
        "schema_version": SCHEMA_VERSION,
        "data_equal": verify.data_equal,
        "max_dev": verify.max_dev,
        "theta": profile.as_ref().map(|p| p.theta.clone()),
        "r": profile.as_ref().map(|p| p.r),
        "theta0": profile.as_ref().map(|p| p.h0),
        "fit_residual": profile.as_ref().map(|p| p.residual),
        "undetermined": profile.as_ref().and_then(|p| p.undetermined),
        "residuals": residuals,
        "drift": drift,
        "aligned_error": aligned_error(&pair, f, mu, scheme)?,
        "classification": verify.classification,
        "params": verify.params,
        "mpc": mpc,
        "notes": notes,
    });
    emit(&report, a.out.as_deref())
}

pub fn mpc(a: &MpcArgs) -> CmdResult {
    let (mu, _) = read_cf64(&a.mask)?;
    let (nu, _) = read_cf64(&a.estimate)?;
    let rep = check_mpc(&nu, &mu, MpcParams::new(a.delta, a.gamma)?)?;
    emit(&json!({ "schema_version": SCHEMA_VERSION, "mpc": rep }), None)?;
    if !rep.pass {
        return Err(Failure::Property("mask phase constraint violated".into()));
    }
    Ok(())
}

fn parse_rect(s: &str) -> Result<Rect, Failure> {
    let v: Vec<i64> = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| usage(format!("bad box {s:?}"))))
        .collect::<Result<_, _>>()?;
    match v.as_slice() {
        [r0, c0, h, w] if *h > 0 && *w > 0 => Ok(Rect { start: [*r0, *c0], extent: [*h as usize, *w as usize] }),
        _ => Err(usage(format!("expected \"r0,c0,height,width\", got {s:?}"))),
    }
}

pub fn osc(a: &OscArgs) -> CmdResult {
    let (g0, _) = read_cf64(&a.estimate)?;
    let fbox = match (&a.block, &a.fbox) {
        (Some(path), _) => {
            let (f0, _) = read_cf64(path)?;
            OscParams::from_object_block(&f0, vec![Shift::ZERO], SUPPORT_REL_THRESHOLD * f0.max_abs())?.fbox
        }
        (None, Some(s)) => parse_rect(s)?,
        (None, None) => return Err(usage("give --block or --fbox")),
    };
    let params = match (&a.t0, a.t0_rows) {
        (Some(s), _) => OscParams { t0: parse_points(s)?.into_iter().map(Shift).collect(), fbox },
        (None, Some(hi)) => OscParams::row_shifts(hi, fbox),
        (None, None) => OscParams { t0: vec![Shift::ZERO], fbox },
    };
    let rep = check_osc(&g0, &params)?;
    emit(&json!({ "schema_version": SCHEMA_VERSION, "osc": rep, "t0": params.t0 }), None)?;
    if !rep.pass {
        return Err(Failure::Property("object support constraint violated".into()));
    }
    Ok(())
}
