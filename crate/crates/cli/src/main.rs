//! Command-line front end: channel-spec ingestion, curve and bound sweeps,
//! CSV emission, and the property-verification battery.

mod spec;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use cqexp_core::bounds::{
    chebyshev_converse, exact_symmetric_bound, refined_sp_bound, sharp_converse,
    symmetric_sigma_closed_form, uniform_optimality_check, BoundReport,
};
use cqexp_core::channel::{capacity, r_infinity};
use cqexp_core::divergence::{d_alpha_flat, d_alpha_petz, golden_thompson_gap};
use cqexp_core::oracle::product_oracle;
use cqexp_core::solver::{exponent_curve, fmt17, saddle_solve};
use cqexp_core::verify::run_battery;
use cqexp_core::{ExtReal, Prior, Tolerances};
use spec::ChannelSpec;
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "cqexp", about = "Error-exponent toolkit for classical-quantum channels")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Channel spec file (JSON)
    #[arg(long)]
    spec: PathBuf,
    /// Lower end of the rate grid
    #[arg(long, default_value_t = 0.05)]
    rmin: f64,
    /// Upper end of the rate grid
    #[arg(long, default_value_t = 0.5)]
    rmax: f64,
    /// Number of rate-grid points
    #[arg(long, default_value_t = 10)]
    rsteps: usize,
    /// Blocklengths, comma separated
    #[arg(long, value_delimiter = ',', default_values_t = vec![100usize])]
    n: Vec<usize>,
    /// Prefactor slack for the refined bound
    #[arg(long, default_value_t = 0.0)]
    gamma: f64,
    /// Exponent floor for the sharp bound (default: half the exponent)
    #[arg(long)]
    nu: Option<f64>,
    /// Type-II budget scale: mu = c * exp(-nR)
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// Override the base numerical tolerance scale (multiplies defaults)
    #[arg(long)]
    tol: Option<f64>,
    /// RNG seed for randomized suites
    #[arg(long, default_value_t = 24601)]
    seed: u64,
    /// Output file (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for independent sweep cells
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Per-input Renyi divergence table against the average output state
    Divergence {
        #[command(flatten)]
        common: Common,
        /// Number of interior alpha-grid points
        #[arg(long, default_value_t = 19)]
        alpha_steps: usize,
    },
    /// Sphere-packing exponent curve over a rate grid
    Exponents {
        #[command(flatten)]
        common: Common,
        /// Also compute the weak (log-Euclidean) exponent per rate
        #[arg(long)]
        weak: bool,
    },
    /// Saddle-point diagnostics per rate at the uniform prior
    Saddle {
        #[command(flatten)]
        common: Common,
    },
    /// Converse bound sweep over (rate, blocklength) cells
    Bound {
        #[command(flatten)]
        common: Common,
    },
    /// Exact hypothesis-testing oracle values over (rate, blocklength) cells
    Oracle {
        #[command(flatten)]
        common: Common,
    },
    /// Demonstrate the exact bound on a spec with a symmetric block
    SymmetricDemo {
        #[command(flatten)]
        common: Common,
    },
    /// Rewrite a spec with every output state as an explicit matrix
    Expand {
        /// Channel spec file (JSON)
        #[arg(long)]
        spec: PathBuf,
        /// Output file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the property-verification battery (exit nonzero on failure)
    Verify {
        /// Suites to run (1-12), comma separated; default all
        #[arg(long, value_delimiter = ',')]
        suites: Vec<usize>,
        #[arg(long, default_value_t = 24601)]
        seed: u64,
    },
}

fn tolerances(common: &Common) -> Tolerances {
    let mut t = Tolerances::default();
    if let Some(scale) = common.tol {
        t.fixed_point *= scale;
        t.bisection *= scale;
        t.minimax_gap *= scale;
        t.first_order *= scale;
        t.extrapolation *= scale;
    }
    t
}

fn emit(common: &Common, text: &str) -> Result<()> {
    match &common.out {
        Some(path) => {
            let mut f = std::fs::File::create(path)
                .with_context(|| format!("creating {}", path.display()))?;
            f.write_all(text.as_bytes())?;
            Ok(())
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn rate_grid(common: &Common) -> Result<Vec<f64>> {
    if !(common.rmin > 0.0 && common.rmax >= common.rmin && common.rsteps >= 1) {
        bail!("rate grid must satisfy 0 < rmin <= rmax, rsteps >= 1");
    }
    if common.rsteps == 1 {
        return Ok(vec![common.rmin]);
    }
    Ok((0..common.rsteps)
        .map(|k| {
            common.rmin + (common.rmax - common.rmin) * k as f64 / (common.rsteps - 1) as f64
        })
        .collect())
}

/// Map independent cells to rows on a bounded worker pool, preserving order.
fn map_cells<T: Send + Sync, F: Fn(&T) -> String + Sync>(
    cells: &[T],
    workers: usize,
    f: F,
) -> Vec<String> {
    if workers <= 1 || cells.len() <= 1 {
        return cells.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let rows: Vec<std::sync::Mutex<String>> =
        cells.iter().map(|_| std::sync::Mutex::new(String::new())).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers.min(cells.len()) {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if k >= cells.len() {
                    break;
                }
                *rows[k].lock().expect("row lock") = f(&cells[k]);
            });
        }
    });
    rows.into_iter().map(|m| m.into_inner().expect("row lock")).collect()
}

fn ext17(v: ExtReal) -> String {
    match v {
        ExtReal::Finite(x) => fmt17(x),
        ExtReal::Infinite => "inf".into(),
    }
}

fn cmd_divergence(common: &Common, alpha_steps: usize) -> Result<()> {
    let t = tolerances(common);
    let channel = ChannelSpec::load(&common.spec)?.to_channel(&t)?;
    let prior = Prior::uniform(channel.size());
    let sigma = cqexp_core::channel::average_output(&channel, &prior, &t)?;
    let mut out = String::from("x,alpha,d_petz,d_flat,gap,reason\n");
    for x in 0..channel.size() {
        for k in 1..=alpha_steps {
            let a = k as f64 / (alpha_steps as f64 + 1.0);
            let row = (|| -> cqexp_core::Result<String> {
                let dp = d_alpha_petz(channel.state(x), &sigma, a, &t)?;
                let df = d_alpha_flat(channel.state(x), &sigma, a, &t)?;
                let gap = golden_thompson_gap(channel.state(x), &sigma, a, &t)?;
                Ok(format!(
                    "{x},{},{},{},{},\n",
                    fmt17(a),
                    ext17(dp),
                    ext17(df),
                    fmt17(gap)
                ))
            })()
            .unwrap_or_else(|e| format!("{x},{},,,,{e}\n", fmt17(a)));
            out.push_str(&row);
        }
    }
    emit(common, &out)
}

fn cmd_exponents(common: &Common, weak: bool) -> Result<()> {
    let t = tolerances(common);
    let channel = ChannelSpec::load(&common.spec)?.to_channel(&t)?;
    let rates = rate_grid(common)?;
    let mut out = String::from("R,E_sp,E_sp_weak,s_star,regime,reason\n");
    // one rate at a time so a failed cell doesn't abort the sweep
    for &r in &rates {
        match exponent_curve(&channel, &[r], weak, &t) {
            Ok(curve) => {
                let p = &curve.points[0];
                out.push_str(&format!(
                    "{},{},{},{},{},\n",
                    fmt17(p.rate),
                    ext17(p.e_sp),
                    p.e_sp_weak.map(ext17).unwrap_or_default(),
                    fmt17(p.s_star),
                    p.regime.as_str()
                ));
            }
            Err(e) => out.push_str(&format!("{},,,,,{e}\n", fmt17(r))),
        }
    }
    emit(common, &out)
}

fn cmd_saddle(common: &Common) -> Result<()> {
    let t = tolerances(common);
    let channel = ChannelSpec::load(&common.spec)?.to_channel(&t)?;
    let prior = Prior::uniform(channel.size());
    let rates = rate_grid(common)?;
    let mut out = String::from("R,alpha_star,s_star,value,minimax_gap,reason\n");
    for &r in &rates {
        match saddle_solve(r, &prior, &channel, &t) {
            Ok(s) => out.push_str(&format!(
                "{},{},{},{},{},\n",
                fmt17(r),
                fmt17(s.alpha_star),
                fmt17(s.s_star),
                ext17(s.value),
                fmt17(s.minimax_gap)
            )),
            Err(e) => out.push_str(&format!("{},,,,,{e}\n", fmt17(r))),
        }
    }
    emit(common, &out)
}

fn cmd_bound(common: &Common) -> Result<()> {
    let t = tolerances(common);
    let channel = ChannelSpec::load(&common.spec)?.to_channel(&t)?;
    let prior = Prior::uniform(channel.size());
    let rates = rate_grid(common)?;
    let cells: Vec<(f64, usize)> = rates
        .iter()
        .flat_map(|&r| common.n.iter().map(move |&n| (r, n)))
        .collect();
    let header = format!("R,{},reason\n", BoundReport::csv_header());
    let rows = map_cells(&cells, common.workers, |&(r, n)| {
        let mut block = String::new();
        let mut push = |res: cqexp_core::Result<BoundReport>, name: &str| match res {
            Ok(rep) => block.push_str(&format!("{},{},\n", fmt17(r), rep.to_csv_row())),
            Err(e) => block.push_str(&format!("{},{name},{n},,,,,{e}\n", fmt17(r))),
        };
        push(
            chebyshev_converse(&channel, &prior, r, n, common.c, &t),
            "chebyshev_converse",
        );
        let nu = common.nu.unwrap_or_else(|| {
            saddle_solve(r, &prior, &channel, &t)
                .ok()
                .and_then(|s| match s.value {
                    ExtReal::Finite(v) => Some(0.5 * v),
                    ExtReal::Infinite => None,
                })
                .unwrap_or(1e-6)
        });
        push(
            sharp_converse(&channel, &prior, r, n, nu, common.c, &t),
            "sharp_converse",
        );
        push(
            refined_sp_bound(&channel, r, n, &prior, common.gamma, common.nu, &t),
            "refined_sp_bound",
        );
        block
    });
    emit(common, &(header + &rows.concat()))
}

fn cmd_oracle(common: &Common) -> Result<()> {
    let t = tolerances(common);
    let channel = ChannelSpec::load(&common.spec)?.to_channel(&t)?;
    let prior = Prior::uniform(channel.size());
    let rates = rate_grid(common)?;
    let cells: Vec<(f64, usize)> = rates
        .iter()
        .flat_map(|&r| common.n.iter().map(move |&n| (r, n)))
        .collect();
    let c = common.c;
    let rows = map_cells(&cells, common.workers, |&(r, n)| {
        (|| -> cqexp_core::Result<String> {
            let saddle = saddle_solve(r, &prior, &channel, &t)?;
            let xn: Vec<usize> = (0..n).map(|i| i % channel.size()).collect();
            let mu = c * (-(n as f64) * r).exp();
            let v = product_oracle(&channel, &xn, &saddle.sigma_star, mu, &t)?;
            Ok(format!("{},{n},{},{},\n", fmt17(r), fmt17(mu), fmt17(v)))
        })()
        .unwrap_or_else(|e| format!("{},{n},,,{e}\n", fmt17(r)))
    });
    emit(common, &format!("R,n,mu,alpha_hat,reason\n{}", rows.concat()))
}

fn cmd_symmetric_demo(common: &Common) -> Result<()> {
    let t = tolerances(common);
    let parsed = ChannelSpec::load(&common.spec)?;
    if parsed.symmetric.is_none() {
        bail!("symmetric-demo requires a spec with a symmetric block");
    }
    let channel = parsed.to_channel(&t)?;
    let prior = Prior::uniform(channel.size());
    let r_inf = r_infinity(&channel, &t)?.value;
    let cap = capacity(&channel, &t)?.value;
    let r = 0.5 * (r_inf + cap);
    let mut out = String::new();
    out.push_str(&format!(
        "channel: {} inputs, dim {}; cutoff rate {:.6}, capacity {:.6}\n",
        channel.size(),
        channel.dim(),
        r_inf,
        cap
    ));
    for s in [0.5, 1.0, 2.0] {
        let rep = uniform_optimality_check(&channel, &prior, s, &t)?;
        out.push_str(&format!(
            "uniform-prior optimality at s = {s}: {} (support deviation {:.2e})\n",
            if rep.optimal { "holds" } else { "FAILS" },
            rep.max_support_deviation
        ));
    }
    let saddle = saddle_solve(r, &prior, &channel, &t)?;
    let cf = symmetric_sigma_closed_form(&channel, saddle.alpha_star, &t)?;
    let dev = cqexp_core::operator::trace_distance(&cf, &saddle.sigma_star);
    out.push_str(&format!(
        "closed-form minimizing state at R = {r:.6}: trace distance to saddle solution {dev:.2e}\n"
    ));
    for &n in &common.n {
        let rep = exact_symmetric_bound(&channel, r, n, &t)?;
        out.push_str(&rep.to_text());
    }
    emit(common, &out)
}

fn cmd_expand(spec_path: &std::path::Path, out: &Option<PathBuf>) -> Result<()> {
    let t = Tolerances::default();
    let parsed = ChannelSpec::load(spec_path)?;
    let channel = parsed.to_channel(&t)?;
    let expanded = ChannelSpec::from_channel(&channel, &parsed.name);
    let text = expanded.to_json() + "\n";
    match out {
        Some(path) => {
            std::fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_verify(suites: &[usize], seed: u64) -> Result<()> {
    let t = Tolerances::default();
    let results = run_battery(suites, seed, &t);
    let mut failed = 0;
    for r in &results {
        println!("{}", r.line());
        if !r.passed {
            failed += 1;
        }
    }
    println!(
        "{} of {} suites passed",
        results.len() - failed,
        results.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Divergence { common, alpha_steps } => cmd_divergence(&common, alpha_steps),
        Command::Exponents { common, weak } => cmd_exponents(&common, weak),
        Command::Saddle { common } => cmd_saddle(&common),
        Command::Bound { common } => cmd_bound(&common),
        Command::Oracle { common } => cmd_oracle(&common),
        Command::SymmetricDemo { common } => cmd_symmetric_demo(&common),
        Command::Expand { spec, out } => cmd_expand(&spec, &out),
        Command::Verify { suites, seed } => cmd_verify(&suites, seed),
    }
}
