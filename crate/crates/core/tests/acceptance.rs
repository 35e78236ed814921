//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use linermoo::cli::FrontGenotype;
use linermoo::evaluation::{fuel_tons_per_day, FEASIBILITY_TOL};
use linermoo::genotype::{decode, random_genotype, Genotype};
use linermoo::instance::load_instance;
use linermoo::metrics::{hv_contribution, hypervolume_2d, nadir, nondominated};
use linermoo::milp::{assignment_from_solution, build_milp, lp_string, read_lp, verify_assignment, Objective};
use linermoo::nsga2::{constrained_dominates, evolve, fast_nondominated_sort, feasible_front, Member, Nsga2Params, Point};
use linermoo::ocea::{run_ocea, run_ocea_with, OceaParams};
use linermoo::oracle::{oracle_front, OracleGrid, DEFAULT_LIMIT};
use linermoo::{Instance, Problem};

type Outcome = Result<String, String>;

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn load(rel: &str) -> Instance {
    load_instance(manifest().join(rel)).expect("bundled instance loads")
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn front_points(members: &[Member]) -> Vec<[f64; 2]> {
    let pts: Vec<[f64; 2]> = feasible_front(members).iter().map(|&i| members[i].solution.objectives()).collect();
    nondominated(&pts)
}

fn hv_inside(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let inside: Vec<[f64; 2]> = points.iter().copied().filter(|p| p[0] < reference[0] && p[1] < reference[1]).collect();
    hypervolume_2d(&inside, reference).expect("filtered to the reference box")
}

struct Toy {
    name: &'static str,
    file: &'static str,
    grid: OracleGrid,
}

fn toys() -> Vec<Toy> {
    vec![
        Toy {
            name: "A (1 route, 2 classes)",
            file: "tests/data/toy_a.json",
            grid: OracleGrid { speed_step_kn: 0.25, weight_levels: 1, offset_step_h: 24.0 },
        },
        Toy {
            name: "B (hub transshipment)",
            file: "tests/data/toy_b.json",
            grid: OracleGrid { speed_step_kn: 2.0, weight_levels: 1, offset_step_h: 24.0 },
        },
        Toy {
            name: "C (parallel routes, 2 paths per OD)",
            file: "tests/data/toy_c.json",
            grid: OracleGrid { speed_step_kn: 2.5, weight_levels: 2, offset_step_h: 24.0 },
        },
    ]
}

fn c1_oracle_equivalence() -> Outcome {
    const SEEDS: u64 = 5;
    const GENERATIONS: usize = 300;
    let mut lines = Vec::new();
    let mut ok = true;
    for toy in toys() {
        let prob = Problem::new(load(toy.file));
        let oracle = oracle_front(&prob, &toy.grid, DEFAULT_LIMIT).map_err(|e| e.to_string())?;
        let opts = oracle.points();
        ensure(!opts.is_empty(), || format!("toy {}: empty oracle front", toy.name))?;
        let reference = nadir(&opts).map(|x| 1.1 * x);
        let hv_oracle = hypervolume_2d(&opts, reference).map_err(|e| e.to_string())?;
        for algo in ["nsga2", "ocea"] {
            let mut hits = 0;
            let mut ratios = Vec::new();
            let mut slowest = Duration::ZERO;
            for seed in 1..=SEEDS {
                let start = Instant::now();
                let members = if algo == "nsga2" {
                    let p = Nsga2Params { pop_size: 100, generations: GENERATIONS, seed, ..Default::default() };
                    evolve(&prob, &p).0.members
                } else {
                    let p = OceaParams { archive_size: 100, generations: GENERATIONS, seed, ..Default::default() };
                    run_ocea(&prob, &p).0.members
                };
                let took = start.elapsed();
                slowest = slowest.max(took);
                let ratio = hv_inside(&front_points(&members), reference) / hv_oracle;
                ratios.push(format!("{ratio:.3}"));
                if ratio >= 0.95 && took <= Duration::from_secs(60) {
                    hits += 1;
                }
            }
            ok &= hits >= 4;
            lines.push(format!(
                "toy {} {algo}: {hits}/5 seeds >= 95% of oracle HV (ratios {}; oracle {} points; slowest run {:.1}s)",
                toy.name,
                ratios.join(", "),
                opts.len(),
                slowest.as_secs_f64()
            ));
        }
    }
    let text = lines.join("\n      ");
    if ok {
        Ok(text)
    } else {
        Err(text)
    }
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_linermoo")
}

fn run_cli(args: &[&str], threads: &str) -> Result<(), String> {
    let out = Command::new(bin())
        .args(args)
        .env("LINERMOO_THREADS", threads)
        .output()
        .map_err(|e| e.to_string())?;
    ensure(out.status.success(), || {
        format!("linermoo {} failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn c2_feasibility() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let analog = manifest().join("data/analog_10_2_3.json");
    let analog = analog.to_str().expect("utf-8 path");
    let prob = Problem::new(load("data/analog_10_2_3.json"));
    let mut rows = 0;
    for algo in ["nsga2", "ocea"] {
        let out = dir.path().join(algo);
        let out_s = out.to_str().expect("utf-8 path");
        run_cli(&["solve", "--instance", analog, "--algo", algo, "--seed", "7", "--generations", "100", "--out", out_s], "1")?;
        let mut rd = csv::Reader::from_path(out.join("front.csv")).map_err(|e| e.to_string())?;
        let printed: Vec<linermoo::cli::FrontRow> = rd.deserialize().collect::<Result<_, _>>().map_err(|e| e.to_string())?;
        let genos: Vec<FrontGenotype> =
            serde_json::from_str(&std::fs::read_to_string(out.join("front_genotypes.json")).map_err(|e| e.to_string())?)
                .map_err(|e| e.to_string())?;
        ensure(printed.len() == genos.len() && !printed.is_empty(), || "front files disagree or are empty".into())?;
        for (row, g) in printed.iter().zip(&genos) {
            let s = decode(&prob, &g.genotype);
            let r = &s.report;
            let continuous = [r.capacity, r.weekly_fleet, r.lag_bound, r.bounds];
            ensure(continuous.iter().all(|&x| x <= FEASIBILITY_TOL), || format!("{algo} row {}: {r:?}", row.solution_id))?;
            let exact = [r.demand, r.conservation, r.no_return, r.no_origin_discharge, r.nonnegativity, r.week_wrap];
            ensure(exact.iter().all(|&x| x == 0.0), || format!("{algo} row {}: {r:?}", row.solution_id))?;
            ensure(s.class.iter().all(|&c| c < prob.inst.vessels.len()), || "class out of range".into())?;
            for (nr, route) in s.n.iter().zip(&prob.inst.routes) {
                ensure((route.n_min..=route.n_max).contains(nr), || format!("fleet {nr} out of bounds"))?;
            }
            let rel = |a: f64, b: f64| (a - b).abs() <= 1e-6 * b.abs().max(1.0);
            ensure(row.feasible && rel(row.f1_usd, s.f1) && rel(row.f2_hours, s.f2), || {
                format!("{algo} row {} re-evaluates to ({}, {})", row.solution_id, s.f1, s.f2)
            })?;
            rows += 1;
        }
    }

    let net = Problem::new(load("data/paper_6routes.json"));
    for seed in 0..10_000u64 {
        let s = decode(&net, &random_genotype(&net, seed));
        let r = &s.report;
        ensure(r.demand == 0.0 && r.conservation == 0.0 && r.no_return == 0.0 && r.no_origin_discharge == 0.0, || {
            format!("genotype seed {seed}: flow residuals {r:?}")
        })?;
    }
    Ok(format!("{rows} front.csv rows feasible; 10000 random decodes with exact-zero flow residuals"))
}

/// Rank by `1 + max rank of any dominator`; dominators always precede in
/// (infeasible, violation, f1, f2) order.
fn oracle_ranks(points: &[Point]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    let key = |p: &Point| (p.violation > 0.0, p.violation, p.obj[0], p.obj[1]);
    order.sort_by(|&a, &b| key(&points[a]).partial_cmp(&key(&points[b])).expect("finite"));
    let mut rank = vec![0usize; points.len()];
    for (k, &i) in order.iter().enumerate() {
        let mut r = 0;
        for &j in &order[..k] {
            let (a, b) = (&points[j], &points[i]);
            let dom = match (a.violation > 0.0, b.violation > 0.0) {
                (false, true) => true,
                (true, false) => false,
                (true, true) => a.violation < b.violation,
                (false, false) => {
                    a.obj[0] <= b.obj[0] && a.obj[1] <= b.obj[1] && (a.obj[0] < b.obj[0] || a.obj[1] < b.obj[1])
                }
            };
            if dom {
                r = r.max(rank[j] + 1);
            }
        }
        rank[i] = r;
    }
    rank
}

fn c3_sorting() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut fronts_total = 0;
    for pop in 0..100 {
        let points: Vec<Point> = (0..1000)
            .map(|_| Point {
                obj: [f64::from(rng.gen_range(0..200u32)), f64::from(rng.gen_range(0..200u32))],
                violation: if rng.gen_bool(0.1) { f64::from(rng.gen_range(1..20u32)) } else { 0.0 },
            })
            .collect();
        let fronts = fast_nondominated_sort(&points);
        let ranks = oracle_ranks(&points);
        let depth = ranks.iter().max().map_or(0, |r| r + 1);
        let mut want = vec![Vec::new(); depth];
        for (i, &r) in ranks.iter().enumerate() {
            want[r].push(i);
        }
        ensure(fronts == want, || format!("population {pop}: partitions differ"))?;
        // sanity on the pairwise rule itself
        for f in &fronts {
            for &a in f {
                ensure(!f.iter().any(|&b| constrained_dominates(&points[b], &points[a])), || "front not mutually nondominated".into())?;
            }
        }
        fronts_total += fronts.len();
    }
    Ok(format!("100 populations x 1000 points, {fronts_total} fronts, identical partitions"))
}

fn c4_hypervolume() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    const GRID: usize = 1000;
    for k in 0..50 {
        let mut pts = Vec::new();
        while pts.len() < 20 {
            let x: f64 = rng.gen();
            let y: f64 = rng.gen();
            pts.push([x, 1.0 - x + 0.2 * y * (1.0 - x) * x]);
            pts = nondominated(&pts);
        }
        let reference = [1.1, 1.1];
        let exact = hypervolume_2d(&pts, reference).map_err(|e| e.to_string())?;
        let lo = [pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min), pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min)];
        let (w, h) = (reference[0] - lo[0], reference[1] - lo[1]);
        // one uniform sample per cell of a 1000 x 1000 stratification
        let mut hits = 0u64;
        for i in 0..GRID {
            for j in 0..GRID {
                let sx = lo[0] + w * (i as f64 + rng.gen::<f64>()) / GRID as f64;
                let sy = lo[1] + h * (j as f64 + rng.gen::<f64>()) / GRID as f64;
                if pts.iter().any(|p| p[0] <= sx && p[1] <= sy) {
                    hits += 1;
                }
            }
        }
        let mc = w * h * hits as f64 / (GRID * GRID) as f64;
        let rel = (mc - exact).abs() / exact;
        worst = worst.max(rel);
        ensure(rel <= 1e-3, || format!("front {k}: exact {exact}, Monte-Carlo {mc}"))?;
        for idx in 0..pts.len() {
            let mut rest = pts.clone();
            rest.remove(idx);
            let by_def = exact - hypervolume_2d(&rest, reference).map_err(|e| e.to_string())?;
            let got = hv_contribution(&pts, idx, reference).map_err(|e| e.to_string())?;
            ensure(got == by_def, || format!("front {k} point {idx}: {got} vs {by_def}"))?;
        }
    }
    Ok(format!("50 fronts, 10^6 stratified samples each, worst relative error {worst:.2e}; contributions exact"))
}

fn c5_esoc() -> Outcome {
    let prob = Problem::new(load("data/analog_10_2_3.json"));
    let params = OceaParams { generations: 300, seed: 11, ..Default::default() };
    let mut updates = 0usize;
    let mut single = 0usize;
    let mut failure: Option<String> = None;
    let (archive, _) = run_ocea_with(&prob, &params, |ev| {
        updates += 1;
        if failure.is_some() {
            return;
        }
        if ev.archive_size != params.archive_size {
            failure = Some(format!("update {updates}: archive size {}", ev.archive_size));
        } else if ev.clusters > params.n_max {
            failure = Some(format!("update {updates}: {} clusters", ev.clusters));
        } else if let Some((before, after)) = ev.hv_before_after {
            single += 1;
            if after < before * (1.0 - 1e-12) {
                failure = Some(format!("update {updates}: HV {before} -> {after}"));
            }
        }
    });
    if let Some(f) = failure {
        return Err(f);
    }
    ensure(archive.members.len() == params.archive_size, || "final archive size".into())?;
    Ok(format!("{updates} updates, {single} single-front updates with non-decreasing HV"))
}

fn c6_fuel() -> Outcome {
    let inst = load("data/paper_6routes.json");
    for v in &inst.vessels {
        for u in [7.0, 9.5, 12.0] {
            for payload in [0.0, 1234.0, v.capacity_teu] {
                let a = fuel_tons_per_day(v, u, payload, &inst.rates);
                let b = fuel_tons_per_day(v, 2.0 * u, payload, &inst.rates);
                ensure(b == 8.0 * a, || format!("class {}: {b} vs 8 x {a}", v.id))?;
            }
        }
    }
    let prob = Problem::new(inst);
    let want = 32.0 * 3.082 / 500.0;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let c = decode(&prob, &random_genotype(&prob, seed)).cost;
        let ratio = c.sea_emission / c.fuel;
        worst = worst.max((ratio - want).abs());
    }
    ensure(worst <= 1e-12, || format!("term ratio off by {worst}"))?;
    ensure((want - 0.19725).abs() < 1e-5, || format!("{want}"))?;
    Ok(format!("doubling speed gives exactly x8; sea-emission/fuel = {want:.6} (max deviation {worst:.1e})"))
}

fn c7_milp() -> Outcome {
    let inst = load("tests/data/toy_milp.json");
    let prob = Problem::new(inst.clone());
    let g = Genotype {
        speeds: vec![vec![16.0, 20.0], vec![24.0, 20.0]],
        class_choice: vec![0, 1],
        start_offsets: vec![3.0, 17.0],
        path_weights: prob.ods.iter().map(|od| vec![1.0; od.paths.len()]).collect(),
    };
    let sol = decode(&prob, &g);
    ensure(sol.is_feasible(), || format!("toy solution infeasible: {:?}", sol.report))?;
    let model = build_milp(&inst, 1.0).map_err(|e| e.to_string())?;
    let values = assignment_from_solution(&model, &inst, &sol).map_err(|e| e.to_string())?;
    let rep = verify_assignment(&model, &inst, &values).map_err(|e| e.to_string())?;
    ensure(rep.f2_gap <= 1e-9, || format!("F2 gap {}", rep.f2_gap))?;
    ensure(rep.f1_gap <= rep.fit_bound + 1e-9 * sol.f1.abs(), || format!("F1 gap {} above fit bound {}", rep.f1_gap, rep.fit_bound))?;
    let lp = read_lp(&lp_string(&model, Objective::Cost)).map_err(|e| e.to_string())?;
    ensure(lp.rows.len() == model.rows.len(), || "LP reparse row count".into())?;
    Ok(format!(
        "{} rows satisfied; F2 gap {:.1e}; F1 gap {:.2} <= fit bound {:.2}",
        model.rows.len(),
        rep.f2_gap,
        rep.f1_gap,
        rep.fit_bound
    ))
}

fn median(mut xs: Vec<usize>) -> usize {
    xs.sort_unstable();
    xs[xs.len() / 2]
}

fn c8_magnitudes() -> Outcome {
    let prob = Problem::new(load("data/analog_10_2_3.json"));
    let p = OceaParams { generations: 300, seed: 1, ..Default::default() };
    let pts = front_points(&run_ocea(&prob, &p).0.members);
    ensure(!pts.is_empty(), || "no feasible point".into())?;
    let best_f1 = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let best_f2 = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
    ensure((1e5..=1e7).contains(&best_f1), || format!("best F1 {best_f1}"))?;
    ensure((1e2..=1e4).contains(&best_f2), || format!("best F2 {best_f2}"))?;

    let prob = Problem::new(load("data/analog_13_2_3.json"));
    let mut o = Vec::new();
    let mut n = Vec::new();
    for seed in 1..=5 {
        let po = OceaParams { generations: 300, seed, ..Default::default() };
        o.push(front_points(&run_ocea(&prob, &po).0.members).len());
        let pn = Nsga2Params { generations: 300, seed, ..Default::default() };
        n.push(front_points(&evolve(&prob, &pn).0.members).len());
    }
    let (mo, mn) = (median(o.clone()), median(n.clone()));
    ensure(mo >= mn, || format!("median front sizes OCEA {mo} < NSGA-II {mn} ({o:?} vs {n:?})"))?;
    Ok(format!(
        "(10,2,3) best F1 {best_f1:.3e} USD, best F2 {best_f2:.3e} h; (13,2,3) median front OCEA {mo} >= NSGA-II {mn}"
    ))
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let toy = manifest().join("tests/data/toy_b.json");
    let toy = toy.to_str().expect("utf-8 path");
    let s = |p: &Path| p.to_str().expect("utf-8 path").to_string();
    let mut checked = 0;
    for algo in ["nsga2", "ocea"] {
        for threads in ["1", "3"] {
            let a = d.join(format!("{algo}_{threads}_a"));
            let b = d.join(format!("{algo}_{threads}_b"));
            for out in [&a, &b] {
                run_cli(&["solve", "--instance", toy, "--algo", algo, "--seed", "5", "--generations", "60", "--out", &s(out)], threads)?;
            }
            let fa = std::fs::read(a.join("front.csv")).map_err(|e| e.to_string())?;
            let fb = std::fs::read(b.join("front.csv")).map_err(|e| e.to_string())?;
            ensure(fa == fb, || format!("{algo} with {threads} threads: front.csv differs"))?;
            checked += 1;
        }
    }
    let net = manifest().join("data/analog_10_2_3.json");
    let (la, lb) = (d.join("a.lp"), d.join("b.lp"));
    for out in [&la, &lb] {
        run_cli(&["export-milp", "--instance", net.to_str().expect("utf-8 path"), "--out", &s(out)], "2")?;
    }
    let (ta, tb) = (std::fs::read(&la).map_err(|e| e.to_string())?, std::fs::read(&lb).map_err(|e| e.to_string())?);
    ensure(ta == tb && !ta.is_empty(), || "LP exports differ".into())?;
    Ok(format!("{checked} repeated solves and one LP export byte-identical"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("1 oracle equivalence", c1_oracle_equivalence),
        ("2 feasibility", c2_feasibility),
        ("3 dominance sorting", c3_sorting),
        ("4 hypervolume", c4_hypervolume),
        ("5 ESOC invariants", c5_esoc),
        ("6 fuel model", c6_fuel),
        ("7 MILP faithfulness", c7_milp),
        ("8 magnitude band and front sizes", c8_magnitudes),
        ("9 determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {name} [{secs:.1}s]: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name} [{secs:.1}s]: {detail}");
            }
        }
    }
    println!("{} of 9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
