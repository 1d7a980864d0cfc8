//! Experiment configuration: the parsed command line, printable back to an
//! equivalent argument list.

use clap::{Args, Parser, Subcommand, ValueEnum};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Parser)]
#[command(name = "loopsoup", version, about = "Coupled random walk and Brownian loop soups")]
pub struct ExperimentConfig {
    /// Worker threads (all cores when absent). Output does not depend on it.
    #[arg(long, global = true, env = "LOOPSOUP_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Command {
    /// Sample a scaled loop soup and write it as JSON.
    Sample(SampleArgs),
    /// Compare both soups near the origin over many seeded fields.
    Couple(CoupleArgs),
    /// Run a statistical verification suite.
    Verify(VerifyArgs),
    /// Draw one or more soup files as SVG.
    Render(RenderArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Walk,
    Brownian,
    Both,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct SampleArgs {
    #[arg(long, value_enum)]
    pub kind: KindArg,
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: f64,
    /// Scaling parameter N.
    #[arg(long)]
    pub scale: u32,
    /// Lattice window before scaling, `a:b` or `a:b,c:d`.
    #[arg(long, allow_hyphen_values = true)]
    pub window: WindowArg,
    /// Largest length index realized as a path.
    #[arg(long)]
    pub nmax: u64,
    #[arg(long, env = "LOOPSOUP_SEED")]
    pub seed: u64,
    /// Bridge intervals per walk step, as a power of two.
    #[arg(long, default_value_t = 1)]
    pub refine: u32,
    /// Add the uncoupled Brownian loops shorter than 5/8 (before scaling).
    #[arg(long)]
    pub small: bool,
    #[arg(long, default_value_t = 0.1)]
    pub t_min: f64,
    /// Output file. With `--kind both`, `.walk` and `.brownian` are inserted
    /// before the extension.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct CoupleArgs {
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub lambda: f64,
    /// One or more scales; several switch on the sweep table.
    #[arg(long, value_delimiter = ',', default_value = "8")]
    pub scale: Vec<u32>,
    #[arg(long, default_value_t = 1.0)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub theta: f64,
    /// First field seed.
    #[arg(long, env = "LOOPSOUP_SEED")]
    pub seed: u64,
    /// Number of fields, seeded `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 100)]
    pub fields: u64,
    #[arg(long, default_value_t = 1 << 14)]
    pub nmax: u64,
    #[arg(long, default_value_t = 1)]
    pub refine: u32,
    /// Skip path realization; sup distances are then absent.
    #[arg(long)]
    pub no_paths: bool,
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct VerifyArgs {
    /// Also write the table as CSV.
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    #[command(subcommand)]
    pub suite: Suite,
}

#[derive(Debug, Clone, PartialEq, Subcommand)]
pub enum Suite {
    /// Exact midpoint law against its Gaussian approximation.
    Clt {
        #[arg(long, default_value = "20..200")]
        m: IntSet,
    },
    /// Covariance of coupled Brownian bridges against s(1 − t).
    Bridge {
        #[arg(long, default_value = "8,64,256")]
        n: IntSet,
        #[arg(long, value_delimiter = ',', default_value = "0.25:0.5,0.125:0.875,0.5:0.5,0.375:0.625,0.75:0.75")]
        pairs: Vec<Pair<f64, f64>>,
        #[arg(long, default_value_t = 20_000)]
        samples: u64,
        #[arg(long, default_value_t = 3.0)]
        tolerance: f64,
        #[arg(long, env = "LOOPSOUP_SEED")]
        seed: u64,
    },
    /// Midpoint law of the coupled walk against the exact conditioned law.
    Quantile {
        #[arg(long, value_delimiter = ',', default_value = "4:0,8:0,8:4,16:2")]
        points: Vec<Pair<u64, i64>>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, env = "LOOPSOUP_SEED")]
        seed: u64,
    },
    /// Poisson counts of the field and the walk/Brownian mismatch rate.
    SoupCounts {
        #[arg(long, value_delimiter = ',', default_value = "1:5,3:20,5:100")]
        points: Vec<Pair<u64, f64>>,
        #[arg(long, default_value_t = 100_000)]
        cells: u64,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, env = "LOOPSOUP_SEED")]
        seed: u64,
    },
    /// Avoidance probability of a ray started at distance r.
    Beurling {
        #[arg(long, default_value_t = 0.1)]
        r: f64,
        #[arg(long, value_delimiter = ',', default_value = "1,4,16")]
        t: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0.25)]
        kappa: f64,
        #[arg(long, default_value_t = 1e-4)]
        absorb: f64,
        #[arg(long, default_value = "0.3:0.7")]
        slope: Pair<f64, f64>,
        #[arg(long, env = "LOOPSOUP_SEED")]
        seed: u64,
    },
    /// Mass of loops that stay inside a domain but approach its boundary.
    Layer {
        #[arg(long, value_enum, default_value_t = DomainArg::Disk)]
        domain: DomainArg,
        #[arg(long, default_value_t = 0.3)]
        slit_start: f64,
        #[arg(long, value_delimiter = ',', default_value = "0.02,0.04,0.08")]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,2")]
        t0: Vec<f64>,
        #[arg(long, default_value_t = 100.0)]
        t_max: f64,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 12)]
        depth: u32,
        #[arg(long, env = "LOOPSOUP_SEED")]
        seed: u64,
    },
    /// Survival of ε + B against erf(ε/√(2t)).
    Ruin {
        #[arg(long, value_delimiter = ',', default_value = "0.05,0.1,0.2")]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1,4")]
        t: Vec<f64>,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 3.0)]
        tolerance: f64,
        #[arg(long, env = "LOOPSOUP_SEED")]
        seed: u64,
    },
    /// KS test of the duration sampler.
    Duration {
        #[arg(long, default_value = "1,5,20")]
        n: IntSet,
        #[arg(long, default_value_t = 100_000)]
        samples: u64,
        #[arg(long, default_value_t = 0.001)]
        alpha: f64,
        #[arg(long, env = "LOOPSOUP_SEED")]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DomainArg {
    Disk,
    Slit,
}

#[derive(Debug, Clone, PartialEq, Args)]
pub struct RenderArgs {
    /// Soup JSON files; repeat to overlay walk and Brownian soups.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Width and height in pixels.
    #[arg(long, default_value_t = 800)]
    pub size: u32,
}

/// A rectangle of lattice sites, `x0:x1,y0:y1`, or `a:b` for a square.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowArg {
    pub x: (i64, i64),
    pub y: (i64, i64),
}

fn parse_span(s: &str) -> Result<(i64, i64), String> {
    // the separator is the first ':' after a leading sign
    let split = s.char_indices().skip(1).find(|&(_, c)| c == ':').map(|(i, _)| i);
    let i = split.ok_or_else(|| format!("expected `a:b`, got `{s}`"))?;
    let a = s[..i].trim().parse::<i64>().map_err(|e| format!("`{s}`: {e}"))?;
    let b = s[i + 1..].trim().parse::<i64>().map_err(|e| format!("`{s}`: {e}"))?;
    if a > b {
        return Err(format!("`{s}`: empty range"));
    }
    Ok((a, b))
}

impl FromStr for WindowArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(',') {
            Some((x, y)) => Ok(Self { x: parse_span(x)?, y: parse_span(y)? }),
            None => {
                let x = parse_span(s)?;
                Ok(Self { x, y: x })
            }
        }
    }
}

impl fmt::Display for WindowArg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.x == self.y {
            write!(f, "{}:{}", self.x.0, self.x.1)
        } else {
            write!(f, "{}:{},{}:{}", self.x.0, self.x.1, self.y.0, self.y.1)
        }
    }
}

/// Comma-separated integers and inclusive ranges `a..b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntSet(pub Vec<(u64, u64)>);

impl IntSet {
    pub fn values(&self) -> Vec<u64> {
        self.0.iter().flat_map(|&(a, b)| a..=b).collect()
    }
}

impl FromStr for IntSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let items = s
            .split(',')
            .map(|item| {
                let parse = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("`{item}`: {e}"));
                match item.split_once("..") {
                    Some((a, b)) => {
                        let (a, b) = (parse(a)?, parse(b)?);
                        if a > b {
                            return Err(format!("`{item}`: empty range"));
                        }
                        Ok((a, b))
                    }
                    None => parse(item).map(|a| (a, a)),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self(items))
    }
}

impl fmt::Display for IntSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> =
            self.0.iter().map(|&(a, b)| if a == b { a.to_string() } else { format!("{a}..{b}") }).collect();
        f.write_str(&parts.join(","))
    }
}

/// `a:b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pair<A, B>(pub A, pub B);

impl<A: FromStr, B: FromStr> FromStr for Pair<A, B>
where
    A::Err: fmt::Display,
    B::Err: fmt::Display,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s.split_once(':').ok_or_else(|| format!("expected `a:b`, got `{s}`"))?;
        Ok(Pair(
            a.trim().parse().map_err(|e| format!("`{s}`: {e}"))?,
            b.trim().parse().map_err(|e| format!("`{s}`: {e}"))?,
        ))
    }
}

impl<A: fmt::Display, B: fmt::Display> fmt::Display for Pair<A, B> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.0, self.1)
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

struct ArgList(Vec<String>);

impl ArgList {
    fn opt(&mut self, name: &str, value: impl fmt::Display) {
        self.0.push(format!("--{name}={value}"));
    }

    fn flag(&mut self, name: &str, on: bool) {
        if on {
            self.0.push(format!("--{name}"));
        }
    }

    fn word(&mut self, w: &str) {
        self.0.push(w.to_string());
    }
}

impl ExperimentConfig {
    /// An argument list (program name first) that parses back to `self`.
    pub fn to_args(&self) -> Vec<String> {
        let mut a = ArgList(vec!["loopsoup".into()]);
        if let Some(t) = self.threads {
            a.opt("threads", t);
        }
        match &self.command {
            Command::Sample(s) => {
                a.word("sample");
                a.opt("kind", s.kind.to_possible_value().expect("no skipped variants").get_name());
                a.opt("lambda", s.lambda);
                a.opt("scale", s.scale);
                a.opt("window", s.window);
                a.opt("nmax", s.nmax);
                a.opt("seed", s.seed);
                a.opt("refine", s.refine);
                a.flag("small", s.small);
                a.opt("t-min", s.t_min);
                a.opt("out", s.out.display());
            }
            Command::Couple(c) => {
                a.word("couple");
                a.opt("lambda", c.lambda);
                a.opt("scale", join(&c.scale));
                a.opt("r", c.r);
                a.opt("theta", c.theta);
                a.opt("seed", c.seed);
                a.opt("fields", c.fields);
                a.opt("nmax", c.nmax);
                a.opt("refine", c.refine);
                a.flag("no-paths", c.no_paths);
                a.opt("out-dir", c.out_dir.display());
            }
            Command::Verify(v) => {
                a.word("verify");
                if let Some(p) = &v.csv {
                    a.opt("csv", p.display());
                }
                match &v.suite {
                    Suite::Clt { m } => {
                        a.word("clt");
                        a.opt("m", m);
                    }
                    Suite::Bridge { n, pairs, samples, tolerance, seed } => {
                        a.word("bridge");
                        a.opt("n", n);
                        a.opt("pairs", join(pairs));
                        a.opt("samples", samples);
                        a.opt("tolerance", tolerance);
                        a.opt("seed", seed);
                    }
                    Suite::Quantile { points, samples, alpha, seed } => {
                        a.word("quantile");
                        a.opt("points", join(points));
                        a.opt("samples", samples);
                        a.opt("alpha", alpha);
                        a.opt("seed", seed);
                    }
                    Suite::SoupCounts { points, cells, alpha, seed } => {
                        a.word("soup-counts");
                        a.opt("points", join(points));
                        a.opt("cells", cells);
                        a.opt("alpha", alpha);
                        a.opt("seed", seed);
                    }
                    Suite::Beurling { r, t, samples, kappa, absorb, slope, seed } => {
                        a.word("beurling");
                        a.opt("r", r);
                        a.opt("t", join(t));
                        a.opt("samples", samples);
                        a.opt("kappa", kappa);
                        a.opt("absorb", absorb);
                        a.opt("slope", slope);
                        a.opt("seed", seed);
                    }
                    Suite::Layer { domain, slit_start, eps, t0, t_max, samples, depth, seed } => {
                        a.word("layer");
                        a.opt("domain", domain.to_possible_value().expect("no skipped variants").get_name());
                        a.opt("slit-start", slit_start);
                        a.opt("eps", join(eps));
                        a.opt("t0", join(t0));
                        a.opt("t-max", t_max);
                        a.opt("samples", samples);
                        a.opt("depth", depth);
                        a.opt("seed", seed);
                    }
                    Suite::Ruin { eps, t, samples, tolerance, seed } => {
                        a.word("ruin");
                        a.opt("eps", join(eps));
                        a.opt("t", join(t));
                        a.opt("samples", samples);
                        a.opt("tolerance", tolerance);
                        a.opt("seed", seed);
                    }
                    Suite::Duration { n, samples, alpha, seed } => {
                        a.word("duration");
                        a.opt("n", n);
                        a.opt("samples", samples);
                        a.opt("alpha", alpha);
                        a.opt("seed", seed);
                    }
                }
            }
            Command::Render(r) => {
                a.word("render");
                for p in &r.input {
                    a.opt("input", p.display());
                }
                a.opt("out", r.out.display());
                a.opt("size", r.size);
            }
        }
        a.0
    }
}
