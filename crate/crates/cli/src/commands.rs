//! One function per subcommand. Each resolves its parameters, computes, and only
//! then writes its bundle; the returned string is a one-line JSON summary.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use expdim_core::cover::{analytic_bound, build_cover, find_min_m, CoverParams};
use expdim_core::dynamics::{find_attracting_cycle, AttractingCycle, ExpMapConfig};
use expdim_core::io::{decode_pgm, encode_pgm, format_itinerary_csv, GrayImage};
use expdim_core::pressure::{bowen_root, certify_dim_gt_one, CertifyOptions, Exponent, ExplicitIfs};
use expdim_core::render::{
    box_count, component_seed, extract_component_boundary, itinerary_agreement, render_grid, whole_surrogate,
    BoxCountFit, ClassGrid, GridSpec, PixelMask, DEFAULT_SCALES,
};
use expdim_core::symbolic::{inverse_branch, kneading_sequence, Itinerary, Kneading};
use expdim_core::Complex64;

use crate::config::{boolean, complex, finite, list_f64, num, window, Resolver};
use crate::output::{csv, fmt_f64, out_dir, png_gray, Bundle};
use crate::{Cli, CliError, Cmd, GridArgs, MapArgs};

pub fn run(cli: &Cli) -> Result<String, CliError> {
    let mut res = Resolver::load(cli.config.as_deref())?;
    let (name, bundle, summary) = match &cli.cmd {
        Cmd::Cycle { map } => cycle(&mut res, map)?,
        Cmd::Cover { map, delta, m, depth, s_max, r_extra, samples } => {
            cover(&mut res, map, CoverFlags { delta, m, depth, s_max, r_extra, samples })?
        }
        Cmd::DimLower { map, schedule, level, t_lo, t_hi, tol, xi_step, grid_side, toy } => dim_lower(
            &mut res,
            map,
            DimFlags { schedule, level, t_lo, t_hi, tol, xi_step, grid_side, toy: *toy },
        )?,
        Cmd::Render { map, grid } => render(&mut res, map, grid)?,
        Cmd::Boxcount { map, grid, input, scales, samples, seed } => {
            boxcount(&mut res, map, grid, input.as_deref(), scales, samples, seed)?
        }
        Cmd::SelfTest => self_test()?,
    };
    let config = res.finish()?;
    let hash = bundle.write(&out_dir(cli.out.as_ref()), &config)?;
    let mut summary = summary;
    summary["content_hash"] = json!(hash);
    summary["subcommand"] = json!(name);
    Ok(summary.to_string())
}

type Outcome = (&'static str, Bundle, serde_json::Value);

fn pair(z: Complex64) -> [f64; 2] {
    [z.re, z.im]
}

fn map_config(res: &mut Resolver, a: &MapArgs, max_iter_default: &str) -> Result<ExpMapConfig, CliError> {
    let lambda = res.required("lambda", a.lambda.as_ref(), complex)?;
    let max_iter: u32 = res.or("max_iter", a.max_iter.as_ref(), max_iter_default, num)?;
    let escape_re = res.or("escape_re", a.escape_re.as_ref(), "50", finite)?;
    let attract_tol = res.or("attract_tol", a.attract_tol.as_ref(), "1e-12", finite)?;
    let bad = |e: expdim_core::dynamics::ConfigError| CliError::Usage(e.to_string());
    ExpMapConfig::new(lambda)
        .and_then(|c| c.with_max_iter(max_iter))
        .and_then(|c| c.with_escape_re(escape_re))
        .and_then(|c| c.with_attract_tol(attract_tol))
        .map_err(bad)
}

fn cycle_of(res: &mut Resolver, a: &MapArgs, cfg: &ExpMapConfig) -> Result<AttractingCycle, CliError> {
    let max_period: usize = res.or("max_period", a.max_period.as_ref(), "16", num)?;
    if max_period == 0 {
        return Err(CliError::Usage("max_period must be at least 1".into()));
    }
    find_attracting_cycle(cfg, max_period).map_err(|e| CliError::NoCycle(format!("no attracting cycle: {e:?}")))
}

#[derive(Serialize)]
struct CycleReport {
    lambda: [f64; 2],
    period: usize,
    points: Vec<[f64; 2]>,
    multiplier: [f64; 2],
    multiplier_modulus: f64,
    kneading: String,
}

fn cycle_report(cfg: &ExpMapConfig, c: &AttractingCycle) -> CycleReport {
    CycleReport {
        lambda: pair(cfg.lambda),
        period: c.period,
        points: c.points.iter().map(|&z| pair(z)).collect(),
        multiplier: pair(c.multiplier),
        multiplier_modulus: c.multiplier.norm(),
        kneading: format_itinerary_csv(&Itinerary(kneading_sequence(c).0)),
    }
}

fn cycle(res: &mut Resolver, a: &MapArgs) -> Result<Outcome, CliError> {
    let cfg = map_config(res, a, "1000")?;
    let c = cycle_of(res, a, &cfg)?;
    let report = cycle_report(&cfg, &c);
    let mut b = Bundle::new("cycle");
    b.add_json("cycle.json", &report);
    let summary = serde_json::to_value(&report).expect("serializable");
    Ok(("cycle", b, summary))
}

struct CoverFlags<'a> {
    delta: &'a Option<String>,
    m: &'a Option<String>,
    depth: &'a Option<String>,
    s_max: &'a Option<String>,
    r_extra: &'a Option<String>,
    samples: &'a Option<String>,
}

#[derive(Serialize)]
struct CoverLevel {
    level: usize,
    cells: usize,
    direct: f64,
    tail: Option<f64>,
    total: Option<f64>,
    analytic_bound: Option<f64>,
    dominated: Option<bool>,
}

fn cover(res: &mut Resolver, a: &MapArgs, f: CoverFlags) -> Result<Outcome, CliError> {
    let cfg = map_config(res, a, "1000")?;
    let c = cycle_of(res, a, &cfg)?;
    let k = kneading_sequence(&c);
    let p = k.period();
    let delta = res.or("delta", f.delta.as_ref(), "0.5", finite)?;
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(CliError::Usage(format!("delta = {delta} must lie in (0, 1]")));
    }
    let depth: usize = res.or("depth", f.depth.as_ref(), "2", num)?;
    let given_m = res.optional("m", f.m.as_ref(), finite)?;
    let m = match given_m {
        Some(m) => m,
        None => find_min_m(p, delta, 50).map_err(|e| CliError::Usage(e.to_string()))?,
    };
    let mut params = CoverParams::new(m, delta, depth);
    params.s_max = res.or("s_max", f.s_max.as_ref(), "64", num)?;
    let r_extra: i64 = res.or("r_extra", f.r_extra.as_ref(), "64", num)?;
    params.r_max = m.ceil() as i64 + r_extra;
    params.samples_per_cell = res.or("samples", f.samples.as_ref(), "256", num)?;
    params.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let admissible_to_50 = (1..=50).all(|n| analytic_bound(p, m, delta, n).is_ok_and(|b| b < 1.0));

    let levels = build_cover(&cfg, &k, &params).map_err(|e| CliError::Usage(e.to_string()))?;
    let mut rows = Vec::new();
    for (_, sum) in &levels {
        let bound = if sum.level >= 1 { analytic_bound(p, m, delta, sum.level).ok() } else { None };
        let total = (!sum.tail_infinite).then(|| sum.total());
        let dominated = bound.zip(total).map(|(b, t)| t <= b);
        rows.push(CoverLevel {
            level: sum.level,
            cells: sum.cells,
            direct: sum.direct,
            tail: (!sum.tail_infinite).then_some(sum.tail),
            total,
            analytic_bound: bound,
            dominated,
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.dominated == Some(false)) {
        return Err(CliError::Invariant(format!(
            "cover sum {:?} exceeds analytic bound {:?} at level {}",
            bad.total, bad.analytic_bound, bad.level
        )));
    }
    let opt = |x: Option<f64>| x.map_or("".to_string(), fmt_f64);
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.level.to_string(),
                r.cells.to_string(),
                fmt_f64(r.direct),
                opt(r.tail),
                opt(r.total),
                opt(r.analytic_bound),
            ]
        })
        .collect();
    let summary = json!({
        "lambda": pair(cfg.lambda),
        "kneading": format_itinerary_csv(&Itinerary(k.0.clone())),
        "delta": delta,
        "m": m,
        "m_from_search": given_m.is_none(),
        "analytic_bound_below_one_to_n50": admissible_to_50,
        "params": params,
        "levels": rows,
    });
    let mut b = Bundle::new("cover");
    b.add("cover.csv", csv(&["level", "cells", "direct", "tail", "total", "analytic_bound"], &table));
    b.add_json("cover.json", &summary);
    Ok(("cover", b, summary))
}

struct DimFlags<'a> {
    schedule: &'a Option<String>,
    level: &'a Option<String>,
    t_lo: &'a Option<String>,
    t_hi: &'a Option<String>,
    tol: &'a Option<String>,
    xi_step: &'a Option<String>,
    grid_side: &'a Option<String>,
    toy: bool,
}

fn dim_lower(res: &mut Resolver, a: &MapArgs, f: DimFlags) -> Result<Outcome, CliError> {
    let toy_flag = f.toy.then(|| "true".to_string());
    let toy = res.or("toy", toy_flag.as_ref(), "false", boolean)?;
    let defaults = CertifyOptions::default();
    let level: usize = res.or("level", f.level.as_ref(), &defaults.level.to_string(), num)?;
    let tol = res.or("tol", f.tol.as_ref(), &defaults.tol.to_string(), finite)?;
    if level == 0 || !(tol > 0.0) {
        return Err(CliError::Usage("level must be at least 1 and tol positive".into()));
    }
    if toy {
        let t_lo = res.or("t_lo", f.t_lo.as_ref(), "0.5", finite)?;
        let t_hi = res.or("t_hi", f.t_hi.as_ref(), "1", finite)?;
        let ifs = ExplicitIfs::toy_three_quarters();
        let iv = bowen_root(&ifs, Exponent::from_value(t_lo), Exponent::from_value(t_hi), tol, level)
            .map_err(|e| CliError::NotCertified(e.to_string()))?;
        let exact = 3f64.ln() / 4f64.ln();
        let summary = json!({
            "system": "three similarities of ratio 1/4",
            "a": iv.a.value(),
            "b": iv.b.value(),
            "width": iv.width,
            "within_tol": iv.within_tol,
            "exact_root": exact,
            "brackets_exact": iv.a.value() <= exact && exact <= iv.b.value(),
        });
        let mut b = Bundle::new("dim-lower");
        b.add_json("dim_lower.json", &summary);
        return Ok(("dim-lower", b, summary));
    }
    let cfg = map_config(res, a, "1000")?;
    let c = cycle_of(res, a, &cfg)?;
    let k = kneading_sequence(&c);
    let schedule = res.or("schedule", f.schedule.as_ref(), "50,100,200,400,800", list_f64)?;
    let opts = CertifyOptions {
        t_lo: res.or("t_lo", f.t_lo.as_ref(), &defaults.t_lo.to_string(), finite)?,
        t_hi: res.or("t_hi", f.t_hi.as_ref(), &defaults.t_hi.to_string(), finite)?,
        tol,
        level,
        margin: defaults.margin,
        grid_side: res.or("grid_side", f.grid_side.as_ref(), &defaults.grid_side.to_string(), num)?,
        xi_step: res.or("xi_step", f.xi_step.as_ref(), &defaults.xi_step.to_string(), finite)?,
    };
    let report = certify_dim_gt_one(&cfg, &k, &schedule, &opts);
    let Some(r) = report.certified_r else {
        return Err(CliError::NotCertified(format!("no R in {schedule:?} gave a Bowen interval above 1")));
    };
    let table: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|row| {
            let iv = row.interval;
            vec![
                fmt_f64(row.r),
                row.blocks.to_string(),
                fmt_f64(row.ln_ln_pairs),
                fmt_f64(row.sum_t1),
                fmt_f64(row.pressure_t1),
                fmt_f64(row.distortion),
                iv.map_or(String::new(), |i| fmt_f64(i.a.excess)),
                iv.map_or(String::new(), |i| fmt_f64(i.b.excess)),
                row.certified.to_string(),
            ]
        })
        .collect();
    let summary = json!({
        "lambda": pair(cfg.lambda),
        "options": opts,
        "certified_r": r,
        "dim_lower_excess": report.hyperbolic_dim_lower.map(|e| e.excess),
        "rows": report.rows,
    });
    let mut b = Bundle::new("dim-lower");
    b.add(
        "dim_lower.csv",
        csv(
            &["r", "blocks", "ln_ln_pairs", "sum_t1", "pressure_t1", "distortion", "a_minus_1", "b_minus_1", "certified"],
            &table,
        ),
    );
    b.add_json("dim_lower.json", &summary);
    Ok(("dim-lower", b, summary))
}

fn grid_spec(res: &mut Resolver, g: &GridArgs) -> Result<GridSpec, CliError> {
    let [x0, x1, y0, y1] = res.or("window", g.window.as_ref(), "-3,7,-5,5", window)?;
    let size: usize = res.or("size", g.size.as_ref(), "2048", num)?;
    let height: usize = res.or("height", g.height.as_ref(), &size.to_string(), num)?;
    GridSpec::new(x0, x1, y0, y1, size, height).map_err(|e| CliError::Usage(e.to_string()))
}

fn rendered(res: &mut Resolver, map: &MapArgs, g: &GridArgs) -> Result<(ExpMapConfig, AttractingCycle, ClassGrid), CliError> {
    let cfg = map_config(res, map, "500")?;
    let c = cycle_of(res, map, &cfg)?;
    let spec = grid_spec(res, g)?;
    let grid = render_grid(&cfg, &c, &spec).map_err(|e| CliError::Usage(e.to_string()))?;
    Ok((cfg, c, grid))
}

fn render(res: &mut Resolver, map: &MapArgs, g: &GridArgs) -> Result<Outcome, CliError> {
    let (cfg, c, grid) = rendered(res, map, g)?;
    let s = grid.spec;
    let gray = grid.gray_bytes();
    let summary = json!({
        "cycle": cycle_report(&cfg, &c),
        "grid": s,
        "histogram": grid.histogram(),
        "histogram_order": "phases 0..p-1, escaped, undecided",
        "undecided_fraction": grid.undecided_fraction(),
        "provenance": grid.provenance,
        "cells_sha256": crate::output::sha256_hex(&grid.to_bytes()),
    });
    let mut b = Bundle::new("render");
    b.add("render.pgm", encode_pgm(&GrayImage { width: s.width, height: s.height, pixels: gray.clone() }));
    b.add("render.png", png_gray(s.width, s.height, &gray));
    b.add_json("render.json", &summary);
    Ok(("render", b, summary))
}

fn mask_image(m: &PixelMask) -> Vec<u8> {
    let pixels = m.bits.iter().map(|&b| if b { 0 } else { 255 }).collect();
    encode_pgm(&GrayImage { width: m.width, height: m.height, pixels })
}

fn fit_rows(set: &str, fit: &BoxCountFit) -> Vec<Vec<String>> {
    fit.counts
        .iter()
        .zip(&fit.residuals)
        .map(|(&(e, n), r)| vec![set.to_string(), e.to_string(), n.to_string(), fmt_f64(*r)])
        .collect()
}

fn scales_of(v: Vec<f64>) -> Result<Vec<usize>, String> {
    v.into_iter()
        .map(|x| if x >= 1.0 && x.fract() == 0.0 { Ok(x as usize) } else { Err(format!("bad box side {x}")) })
        .collect()
}

fn boxcount(
    res: &mut Resolver,
    map: &MapArgs,
    g: &GridArgs,
    input: Option<&std::path::Path>,
    scales: &Option<String>,
    samples: &Option<String>,
    seed: &Option<String>,
) -> Result<Outcome, CliError> {
    let default_scales = DEFAULT_SCALES.map(|s| s.to_string()).join(",");
    let scales = scales_of(res.or("scales", scales.as_ref(), &default_scales, list_f64)?).map_err(CliError::Usage)?;
    let fit = |m: &PixelMask| box_count(m, &scales).map_err(|e| CliError::Usage(e.to_string()));
    let header = ["set", "box_side", "boxes", "residual"];
    let mut b = Bundle::new("boxcount");

    if let Some(path) = input {
        let bytes = std::fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let img = decode_pgm(&bytes).map_err(|e| CliError::Usage(e.to_string()))?;
        let m = PixelMask { width: img.width, height: img.height, bits: img.pixels.iter().map(|&p| p == 0).collect() };
        let f = fit(&m)?;
        let summary = json!({
            "input_sha256": crate::output::sha256_hex(&bytes),
            "points": m.count(),
            "input": f,
        });
        b.add("boxcount.csv", csv(&header, &fit_rows("input", &f)));
        b.add_json("boxcount.json", &summary);
        return Ok(("boxcount", b, summary));
    }

    let (cfg, c, grid) = rendered(res, map, g)?;
    let samples: usize = res.or("samples", samples.as_ref(), "1000", num)?;
    let seed: u64 = res.or("seed", seed.as_ref(), "0", num)?;
    let k = kneading_sequence(&c);
    let s = grid.spec;
    // U_0 contains a left half-plane: seed on the leftmost phase-0 pixel at the height of z_0.
    let target = Complex64::new(s.x_min - (s.x_max - s.x_min), c.points[0].im);
    let seed_px = component_seed(&grid, 0, target)
        .ok_or_else(|| CliError::Usage("window contains no phase-0 pixel at the height of z_0".into()))?;
    let u0 = extract_component_boundary(&grid, seed_px);
    let whole = whole_surrogate(&grid);
    let f0 = fit(&u0)?;
    let fw = fit(&whole)?;
    let agreement = sampled_agreement(&cfg, &k, &grid, &u0, samples, seed, 4 * c.period);
    let summary = json!({
        "cycle": cycle_report(&cfg, &c),
        "grid": s,
        "seed_pixel": seed_px,
        "boundary_u0": { "points": u0.count(), "fit": f0 },
        "whole_surrogate": { "points": whole.count(), "fit": fw },
        "slope_gap": fw.slope - f0.slope,
        "itinerary_check": {
            "depth": 4 * c.period,
            "seed": seed,
            "result": agreement,
            "fraction": agreement.fraction(),
        },
        "undecided_fraction": grid.undecided_fraction(),
    });
    let mut rows = fit_rows("boundary_u0", &f0);
    rows.extend(fit_rows("whole_surrogate", &fw));
    b.add("boxcount.csv", csv(&header, &rows));
    b.add("boundary_u0.pgm", mask_image(&u0));
    b.add("whole_surrogate.pgm", mask_image(&whole));
    b.add_json("boxcount.json", &summary);
    Ok(("boxcount", b, summary))
}

/// Up to `samples` distinct mask pixels chosen by a seeded ChaCha stream.
pub fn sampled_agreement(
    cfg: &ExpMapConfig,
    k: &Kneading,
    grid: &ClassGrid,
    mask: &PixelMask,
    samples: usize,
    seed: u64,
    depth: usize,
) -> expdim_core::render::ItineraryAgreement {
    let px = mask.pixels();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, px.len(), samples.min(px.len())).into_vec();
    idx.sort_unstable();
    let chosen: Vec<(usize, usize)> = idx.into_iter().map(|i| px[i]).collect();
    itinerary_agreement(cfg, k, grid, &chosen, depth)
}

#[derive(Serialize)]
struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn self_test() -> Result<Outcome, CliError> {
    let mut checks = Vec::new();

    let cfg = ExpMapConfig::new(Complex64::new(-5.0, 0.0)).expect("valid");
    let z0 = -4.798045654607696;
    match find_attracting_cycle(&cfg, 8) {
        Ok(c) => checks.push(Check {
            name: "cycle_minus_five",
            pass: c.period == 2 && (c.points[0].re - z0).abs() < 1e-12 && kneading_sequence(&c).0 == vec![0],
            detail: format!("p = {}, z0 = {}", c.period, c.points[0]),
        }),
        Err(e) => checks.push(Check { name: "cycle_minus_five", pass: false, detail: format!("{e:?}") }),
    }

    let mut worst = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..1000 {
        use rand::Rng;
        let s: i64 = rng.gen_range(-50..=50);
        let r: f64 = 10f64.powf(rng.gen_range(0.0..6.0));
        let z = Complex64::from_polar(r, rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI));
        let w = inverse_branch(&cfg, s, z).expect("nonzero");
        worst = worst.max((cfg.lambda * w.exp() - z).norm() / z.norm());
    }
    checks.push(Check { name: "branch_inverts_map", pass: worst < 1e-12, detail: format!("max rel err {worst:e}") });

    let exact = 3f64.ln() / 4f64.ln();
    let toy = bowen_root(&ExplicitIfs::toy_three_quarters(), Exponent::from_value(0.5), Exponent::from_value(1.0), 1e-3, 1);
    checks.push(match toy {
        Ok(iv) => Check {
            name: "toy_bowen_root",
            pass: iv.within_tol && iv.a.value() <= exact && exact <= iv.b.value(),
            detail: format!("[{}, {}]", iv.a.value(), iv.b.value()),
        },
        Err(e) => Check { name: "toy_bowen_root", pass: false, detail: e.to_string() },
    });

    let mut line = PixelMask::empty(2048, 64);
    (0..2048).for_each(|c| line.set(c, 31));
    let full = PixelMask { width: 512, height: 512, bits: vec![true; 512 * 512] };
    for (name, m, want) in [("boxcount_line", &line, 1.0), ("boxcount_full", &full, 2.0)] {
        let fit = box_count(m, &DEFAULT_SCALES).map_err(|e| CliError::Invariant(e.to_string()))?;
        checks.push(Check { name, pass: (fit.slope - want).abs() < 0.05, detail: format!("slope {}", fit.slope) });
    }

    let all = checks.iter().all(|c| c.pass);
    if !all {
        let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();
        return Err(CliError::Invariant(format!("self-test failed: {failed:?}")));
    }
    let summary = json!({ "checks": checks, "all_pass": all });
    let mut b = Bundle::new("self-test");
    b.add_json("self_test.json", &summary);
    Ok(("self-test", b, summary))
}
