//! End-to-end driver: seeds, connections, growth, index pair, homology and
//! certification, plus interval sweeps.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use log::{debug, info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::boxtree::{BoxId, BoxTree};
use crate::combinat::{
    build_index_pair, exit_closure_step, grow_insert_keeping, ids_of_keys, insert_onebox, keys_of_ids, transition_matrix, CacheKey, CellBlock, Grid, GrowLimits,
    ImageCache, IndexPair, PairReport,
};
use crate::connect::{find_connections, ActionWeights, ConnectOptions, Connections, SkeletonPair};
use crate::dynamics::{Domain, PlanarMap, Point2, SystemKind, SystemSpec};
use crate::error::{Error, Result};
use crate::homology::{
    build_symbol_system, entropy_lower_bound, induced_map_with_homology, reduce_recurrent, verify_sft,
    CertificationReport, CubicalPair, EntropyBound, GradedIntMatrix, Reduced, SymbolSystem,
};
use crate::interval::{parse_outward, IvScalar};
use crate::seeds::{add_orbits_without_connections, build_skeleton, find_periodic_orbits, LabeledPoint, Skeleton, SkeletonMode};

/// Environment variable naming the default cache directory.
pub const CACHE_DIR_ENV: &str = "INDEXPAIR_CACHE_DIR";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Homoclinic,
    Periodic,
    PeriodicPlusOrbits,
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homoclinic" => Ok(Mode::Homoclinic),
            "periodic" => Ok(Mode::Periodic),
            "periodic-plus-orbits" => Ok(Mode::PeriodicPlusOrbits),
            other => Err(Error::Config(format!("unknown mode {other:?}"))),
        }
    }
}

/// Additive constant of the action weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KPolicy {
    /// `K* + 1`.
    Auto,
    Value(f64),
    /// Unit weights (plain BFS).
    Off,
}

impl FromStr for KPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "auto" => Ok(KPolicy::Auto),
            "off" => Ok(KPolicy::Off),
            v => v.parse::<f64>().map(KPolicy::Value).map_err(|_| Error::Config(format!("bad K value {v:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub map: SystemKind,
    /// Decimal endpoints, parsed outward. For the Hénon map this is `a`.
    pub eps_lo: String,
    pub eps_hi: String,
    pub d_start: u32,
    pub d_end: u32,
    pub mode: Mode,
    pub max_period: usize,
    /// Periods of orbits added to the seed set without connections.
    pub add_periods: Vec<usize>,
    pub k_policy: KPolicy,
    pub maxpow: usize,
    pub out: Option<PathBuf>,
    pub cache: Option<PathBuf>,
    pub max_iterations: usize,
    pub max_boxes: usize,
    /// Regrowth rounds allowed when exit boxes map back into the core.
    pub max_repairs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            map: SystemKind::Standard,
            eps_lo: "2".into(),
            eps_hi: "2".into(),
            d_start: 4,
            d_end: 9,
            mode: Mode::Homoclinic,
            max_period: 2,
            add_periods: Vec::new(),
            k_policy: KPolicy::Auto,
            maxpow: 32,
            out: None,
            cache: None,
            max_iterations: GrowLimits::default().max_iterations,
            max_boxes: GrowLimits::default().max_boxes,
            max_repairs: 8,
        }
    }
}

impl RunConfig {
    pub fn horseshoe(depth: u32) -> Self {
        RunConfig {
            map: SystemKind::HorseshoeModel,
            eps_lo: "0".into(),
            eps_hi: "0".into(),
            d_start: depth.min(3),
            d_end: depth,
            k_policy: KPolicy::Off,
            ..Default::default()
        }
    }

    pub fn eps(&self) -> Result<IvScalar> {
        let lo = parse_outward(&self.eps_lo)?;
        let hi = parse_outward(&self.eps_hi)?;
        if lo.lo() > hi.hi() {
            return Err(Error::Config(format!("eps lo {} exceeds hi {}", self.eps_lo, self.eps_hi)));
        }
        IvScalar::new(lo.lo(), hi.hi())
    }

    pub fn validate(&self) -> Result<()> {
        self.eps()?;
        if self.d_start > self.d_end {
            return Err(Error::Config(format!("depth start {} exceeds end {}", self.d_start, self.d_end)));
        }
        if self.mode != Mode::Homoclinic && self.max_period == 0 {
            return Err(Error::Config("periodic modes need P >= 1".into()));
        }
        if self.maxpow == 0 {
            return Err(Error::Config("maxpow must be at least 1".into()));
        }
        if self.map != SystemKind::Standard && self.mode != Mode::Homoclinic {
            return Err(Error::Config("periodic modes are only defined for the standard map".into()));
        }
        Ok(())
    }

    pub fn system(&self) -> Result<SystemSpec> {
        match self.map {
            SystemKind::Standard => SystemSpec::standard(self.eps()?),
            SystemKind::Henon => Ok(SystemSpec::henon(self.eps()?, parse_outward("0.3")?)),
            SystemKind::HorseshoeModel => Ok(SystemSpec::horseshoe()),
        }
    }

    /// Cache file: the explicit path, else one per interval in the
    /// environment directory, else inside the output directory.
    pub fn cache_path(&self) -> Option<PathBuf> {
        if let Some(p) = &self.cache {
            return Some(p.clone());
        }
        if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
            return Some(PathBuf::from(dir).join(self.cache_name()));
        }
        self.out.as_ref().map(|o| o.join("images.cache"))
    }

    fn cache_name(&self) -> String {
        let map = match self.map {
            SystemKind::Standard => "standard",
            SystemKind::Henon => "henon",
            SystemKind::HorseshoeModel => "horseshoe",
        };
        format!("{map}_{}_{}.cache", self.eps_lo, self.eps_hi)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub map: Option<SystemKind>,
    pub eps_lo: String,
    pub eps_hi: String,
    /// Outward-rounded parameter interval actually used.
    pub eps_interval: [f64; 2],
    pub depth: u32,
    pub tree_boxes: usize,
    pub p1_boxes: usize,
    pub p0_boxes: usize,
    pub betti: [usize; 3],
    pub h1_rank: usize,
    pub reduced_h1_rank: usize,
    pub symbols_before: usize,
    pub symbols_after: usize,
    pub certified_edges: usize,
    pub entropy_lb: f64,
    pub entropy_lb_str: String,
    pub entropy_power: usize,
    pub no_cycle: bool,
    pub wall_time_s: f64,
    pub image_evaluations: usize,
    /// Distinct cache keys added during the run.
    pub cache_insertions: usize,
    pub grow_rounds: usize,
    pub pair_ok: bool,
    pub lazy_ok: bool,
    pub shift_equivalence_ok: bool,
    pub ok: bool,
    pub failure: Option<String>,
}

/// In-memory products of a run, for callers that want more than the summary.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub system: Option<SystemSpec>,
    pub skeleton: Skeleton,
    pub tree: Option<BoxTree>,
    pub connections: Option<Connections>,
    pub ever_in_s: BTreeSet<CacheKey>,
    pub created: BTreeSet<CacheKey>,
    pub pair: Option<IndexPair>,
    pub pair_report: Option<PairReport>,
    pub induced: Option<GradedIntMatrix>,
    pub reduced: Option<Reduced>,
    pub candidate: Option<SymbolSystem>,
    pub symbols: Option<SymbolSystem>,
    pub entropy: Option<EntropyBound>,
}

#[derive(Debug)]
pub struct Run {
    pub result: RunResult,
    pub artifacts: Artifacts,
}

/// Saved index pair as lattice squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFile {
    pub depth: u32,
    pub side: u32,
    pub torus: bool,
    /// `[x_lo, x_hi, y_lo, y_hi]`.
    pub root: [f64; 4],
    pub p1: Vec<(u32, u32)>,
    pub p0: Vec<(u32, u32)>,
}

impl PairFile {
    pub fn new(tree: &BoxTree, domain: &Domain, pair: &IndexPair) -> Self {
        let r = tree.root();
        PairFile {
            depth: tree.depth(),
            side: tree.side(),
            torus: domain.is_torus(),
            root: [r.x.lo(), r.x.hi(), r.y.lo(), r.y.hi()],
            p1: pair.p1.iter().map(|&b| tree.cell(b)).collect(),
            p0: pair.p0.iter().map(|&b| tree.cell(b)).collect(),
        }
    }
}

/// Points and pairs to connect, plus points that only seed growth.
fn skeleton_for(cfg: &RunConfig, sys: &SystemSpec) -> Result<(Skeleton, Vec<Point2>)> {
    let both_ways = |pts: Vec<(String, Point2)>| {
        let mut sk = Skeleton::default();
        for (l, p) in &pts {
            sk.points.push(LabeledPoint { label: l.clone(), point: *p });
        }
        for (la, a) in &pts {
            for (lb, b) in &pts {
                if la != lb {
                    sk.pairs.push(SkeletonPair { src: *a, dst: *b, label: format!("{la}->{lb}") });
                }
            }
        }
        sk
    };
    match sys.kind {
        SystemKind::Standard => {
            let mode = if cfg.mode == Mode::Homoclinic { SkeletonMode::Homoclinic } else { SkeletonMode::Periodic };
            let sk = build_skeleton(sys, mode, cfg.max_period)?;
            if cfg.mode != Mode::PeriodicPlusOrbits || cfg.add_periods.is_empty() {
                return Ok((sk, Vec::new()));
            }
            let pmax = cfg.add_periods.iter().copied().max().unwrap_or(0);
            let extra: Vec<_> = find_periodic_orbits(sys, pmax)?
                .into_iter()
                .filter(|o| o.is_hyperbolic() && cfg.add_periods.contains(&o.period))
                .collect();
            let full = add_orbits_without_connections(&sk, &extra);
            let pts = full.points.iter().filter(|p| p.label.starts_with("extra")).map(|p| p.point).collect();
            Ok((full, pts))
        }
        // both fixed points and the period-2 orbit
        SystemKind::HorseshoeModel => Ok((
            both_ways(vec![
                ("p".into(), Point2::new(0.0, 0.0)),
                ("q".into(), Point2::new(0.75, 0.75)),
                ("a".into(), Point2::new(0.3, 0.9)),
                ("b".into(), Point2::new(0.9, 0.3)),
            ]),
            Vec::new(),
        )),
        SystemKind::Henon => {
            let (a, b) = (sys.params[0].mid(), sys.params[1].mid());
            let disc = (1.0 - b) * (1.0 - b) + 4.0 * a;
            if a <= 0.0 || disc < 0.0 {
                return Err(Error::Seeding(format!("no real fixed points for a = {a}, b = {b}")));
            }
            let x = |s: f64| (-(1.0 - b) + s * disc.sqrt()) / (2.0 * a);
            let (x1, x2) = (x(1.0), x(-1.0));
            Ok((
                both_ways(vec![("p+".into(), Point2::new(x1, b * x1)), ("p-".into(), Point2::new(x2, b * x2))]),
                Vec::new(),
            ))
        }
    }
}

fn grid_at(domain: Domain) -> impl Fn(u32) -> Grid {
    let root = domain.root();
    move |d| Grid::new(&BoxTree::from_root(&root, d).expect("valid root"), &domain)
}

fn load_cache(path: &Path, sys: &SystemSpec) -> Result<ImageCache> {
    let meta = meta_path(path);
    if !path.exists() {
        return Ok(ImageCache::new());
    }
    let stored: SystemSpec = serde_json::from_str(&std::fs::read_to_string(&meta).map_err(|e| {
        Error::Config(format!("cache {} has no readable metadata {}: {e}", path.display(), meta.display()))
    })?)?;
    if stored != *sys {
        return Err(Error::Config(format!("cache {} was built for a different system", path.display())));
    }
    ImageCache::load(grid_at(sys.domain()), path)
}

fn save_cache(path: &Path, sys: &SystemSpec, cache: &ImageCache) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    cache.save(grid_at(sys.domain()), path)?;
    std::fs::write(meta_path(path), serde_json::to_string(sys)?)?;
    Ok(())
}

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

struct State {
    cache: ImageCache,
    art: Artifacts,
    res: RunResult,
}

/// Grows an isolating neighbourhood from `seed` and turns it into an index
/// pair. Exit boxes that map back into the core are added to the seed and
/// growth is repeated.
fn grow_pair(cfg: &RunConfig, sys: &SystemSpec, tree: &mut BoxTree, st: &mut State, seed: Vec<u64>) -> Result<IndexPair> {
    let domain = sys.domain();
    let limits = GrowLimits { max_iterations: cfg.max_iterations, max_boxes: cfg.max_boxes };
    let mut seed = seed;
    // exit boxes that map back into the core join S for good
    let mut keep: Vec<u64> = Vec::new();
    for round in 0..=cfg.max_repairs {
        st.res.grow_rounds = round + 1;
        // a fresh top layer records exactly the images growth asks for
        let mut layer = ImageCache::layered_over(std::mem::take(&mut st.cache));
        let rep = grow_insert_keeping(tree, sys, &mut layer, &seed, &keep, limits);
        st.cache = layer.flatten();
        let rep = rep.map_err(|e| e.at("grow"))?;
        st.art.ever_in_s.extend(rep.ever_in_s.iter().copied());
        st.art.created.extend(rep.created.iter().copied());

        // the exit set may need any neighbour of S, so make them all live
        let s_keys = keys_of_ids(tree, &rep.s);
        insert_onebox(tree, &domain, &rep.s);
        let s_ids = ids_of_keys(tree, &s_keys);
        let t = transition_matrix(tree, sys, &mut st.cache, Some(&s_ids));
        let mut pair = build_index_pair(tree, &domain, &s_ids, &t).map_err(|e| e.at("index-pair"))?;
        let t = loop {
            let t = transition_matrix(tree, sys, &mut st.cache, Some(&pair.p1));
            let add = exit_closure_step(&pair, &t, tree, &domain);
            if add.is_empty() {
                break t;
            }
            debug!("exit closure: {} boxes", add.len());
            pair.extend_exit(&add);
        };
        let report = crate::combinat::verify_index_pair(&pair, &t, tree, &domain);
        if report.ok() {
            st.art.pair_report = Some(report);
            return Ok(pair);
        }
        if report.exit_returns.is_empty() || round == cfg.max_repairs {
            st.art.pair_report = Some(report.clone());
            st.art.pair = Some(pair);
            return Err(Error::NotIsolating(format!(
                "index-pair checks failed: {} core escapes, {} exit returns, {} exit touches, {} not isolated, {} missing neighbours",
                report.core_escapes.len(),
                report.exit_returns.len(),
                report.exit_touches.len(),
                report.not_isolated.len(),
                report.missing_neighbors
            ))
            .at("verify"));
        }
        info!("repair round {}: {} exit boxes map into the core", round + 1, report.exit_returns.len());
        keep.extend(keys_of_ids(tree, &report.exit_returns));
        seed = s_keys;
    }
    unreachable!("loop returns on its last round")
}

fn stages(cfg: &RunConfig, sys: &SystemSpec, st: &mut State) -> Result<()> {
    let domain = sys.domain();
    let (skeleton, extra) = skeleton_for(cfg, sys).map_err(|e| e.at("seeds"))?;
    st.art.skeleton = skeleton.clone();

    let mut tree = BoxTree::from_root(&domain.root(), cfg.d_start)?;
    let weights = match (sys.kind, cfg.k_policy) {
        (SystemKind::Standard, KPolicy::Auto) => Some(ActionWeights::default_for(sys).map_err(|e| e.at("connect"))?),
        (SystemKind::Standard, KPolicy::Value(k)) => Some(ActionWeights::new(sys, k).map_err(|e| e.at("connect"))?),
        (_, KPolicy::Value(_)) => return Err(Error::Config("action weights are only defined for the standard map".into())),
        _ => None,
    };
    let conns = find_connections(
        &mut tree,
        sys,
        &mut st.cache,
        &skeleton.pairs,
        ConnectOptions::new(cfg.d_start, cfg.d_end),
        weights.as_ref(),
    )
    .map_err(|e| e.at("connect"))?;
    let mut seed_ids: Vec<BoxId> = conns.paths.iter().flat_map(|p| p.0.iter().copied()).collect();
    st.art.connections = Some(conns);
    let mut seed = keys_of_ids(&tree, &seed_ids);
    if !extra.is_empty() {
        tree.insert(&extra);
        seed_ids = tree.find(&extra).into_iter().flatten().collect();
        seed.extend(keys_of_ids(&tree, &seed_ids));
    }
    seed.sort_unstable();
    seed.dedup();

    let pair = grow_pair(cfg, sys, &mut tree, st, seed);
    st.res.tree_boxes = tree.len();
    st.res.depth = tree.depth();
    let pair = match pair {
        Ok(p) => p,
        Err(e) => {
            st.art.tree = Some(tree);
            return Err(e);
        }
    };
    st.res.p1_boxes = pair.p1.len();
    st.res.p0_boxes = pair.p0.len();
    st.res.pair_ok = true;
    st.art.pair = Some(pair.clone());
    st.res.lazy_ok = st.art.created == st.art.ever_in_s && st.art.ever_in_s.iter().all(|k| st.cache.contains(k));
    if !st.res.lazy_ok {
        warn!("lazy evaluation property does not hold");
    }

    let cpair = CubicalPair::from_index_pair(&tree, &domain, &pair).map_err(|e| e.at("homology"))?;
    let depth = tree.depth();
    let mut images: Vec<Vec<CellBlock>> = Vec::with_capacity(cpair.ids().len());
    for &id in cpair.ids() {
        let img = st.cache.image(depth, tree.keys()[id]).ok_or(Error::IncompleteMap(id)).map_err(|e| e.at("homology"))?;
        if img.truncated {
            return Err(Error::Coverage(format!("image of box {id} is clipped at the domain margin")).at("homology"));
        }
        images.push(img.blocks.clone());
    }
    st.art.tree = Some(tree);

    let (g, _) = induced_map_with_homology(&cpair, &images).map_err(|e| e.at("homology"))?;
    st.res.betti = g.betti;
    st.res.h1_rank = g.betti[1];
    let red = reduce_recurrent(&g);
    let se_ok = red.equiv[0].verify(&g.m0, &red.m.m0) && red.equiv[1].verify(&g.m1, &red.m.m1);
    st.res.shift_equivalence_ok = se_ok;
    st.res.reduced_h1_rank = red.m.betti[1];
    st.art.induced = Some(g);
    if !se_ok {
        st.art.reduced = Some(red);
        return Err(Error::Homology("shift-equivalence identities fail".into()).at("reduce"));
    }
    let cand = build_symbol_system(&red.m);
    let sys_c = verify_sft(&cand, &red.m);
    let h = entropy_lower_bound(&sys_c.a, cfg.maxpow);
    st.res.symbols_before = cand.len();
    st.res.symbols_after = sys_c.len();
    st.res.certified_edges = sys_c.n_edges();
    st.res.entropy_lb = h.value;
    st.res.entropy_lb_str = h.decimal();
    st.res.entropy_power = h.power;
    st.res.no_cycle = h.no_cycle;
    st.art.reduced = Some(red);
    st.art.candidate = Some(cand);
    st.art.symbols = Some(sys_c);
    st.art.entropy = Some(h);
    Ok(())
}

fn write_artifacts(dir: &Path, st: &State, sys: &SystemSpec) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("skeleton.json"), st.art.skeleton.to_json()?)?;
    if let Some(c) = &st.art.connections {
        c.write_jsonl(std::io::BufWriter::new(std::fs::File::create(dir.join("connections.jsonl"))?))?;
    }
    if let Some(t) = &st.art.tree {
        t.save(&dir.join("tree.txt"))?;
        if let Some(p) = &st.art.pair {
            std::fs::write(dir.join("pair.json"), serde_json::to_string(&PairFile::new(t, &sys.domain(), p))?)?;
        }
    }
    if let Some(r) = &st.art.pair_report {
        std::fs::write(dir.join("pair_report.json"), serde_json::to_string_pretty(r)?)?;
    }
    if let Some(g) = &st.art.induced {
        std::fs::write(dir.join("induced.json"), serde_json::to_string(g)?)?;
    }
    if let (Some(g), Some(red), Some(s), Some(h)) = (&st.art.induced, &st.art.reduced, &st.art.symbols, &st.art.entropy) {
        let rep = CertificationReport::new(g, red, s, h, st.res.shift_equivalence_ok);
        std::fs::write(dir.join("certification.json"), serde_json::to_string_pretty(&rep)?)?;
    }
    std::fs::write(dir.join("result.json"), serde_json::to_string_pretty(&st.res)?)?;
    Ok(())
}

/// One complete run. Configuration problems are returned as errors; a
/// failing stage is recorded in the result (`ok = false`) and the partial
/// artifacts are still written.
pub fn cmd_run(cfg: &RunConfig) -> Result<Run> {
    let start = Instant::now();
    cfg.validate()?;
    let sys = cfg.system()?;
    let eps = cfg.eps()?;
    let cache_path = cfg.cache_path();
    let cache = match &cache_path {
        Some(p) => load_cache(p, &sys)?,
        None => ImageCache::new(),
    };
    let (evals0, len0) = (cache.evaluations(), cache.len());
    let mut st = State {
        cache,
        art: Artifacts { system: Some(sys.clone()), ..Default::default() },
        res: RunResult {
            map: Some(cfg.map),
            eps_lo: cfg.eps_lo.clone(),
            eps_hi: cfg.eps_hi.clone(),
            eps_interval: [eps.lo(), eps.hi()],
            depth: cfg.d_end,
            entropy_lb_str: EntropyBound::default().decimal(),
            ..Default::default()
        },
    };
    let outcome = stages(cfg, &sys, &mut st);
    st.res.image_evaluations = st.cache.evaluations() - evals0;
    st.res.cache_insertions = st.cache.len() - len0;
    st.res.ok = outcome.is_ok();
    if let Err(e) = &outcome {
        warn!("run failed: {e}");
        st.res.failure = Some(e.to_string());
    }
    st.res.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(p) = &cache_path {
        save_cache(p, &sys, &st.cache)?;
    }
    if let Some(dir) = &cfg.out {
        write_artifacts(dir, &st, &sys)?;
    }
    info!(
        "run [{}, {}]: ok={} entropy >= {} ({} symbols), {:.1}s",
        cfg.eps_lo, cfg.eps_hi, st.res.ok, st.res.entropy_lb_str, st.res.symbols_after, st.res.wall_time_s
    );
    Ok(Run { result: st.res, artifacts: st.art })
}

/// Splits `[lo, hi]` (multiples of 0.001) into steps of 0.005 above 1 and
/// 0.001 below. A degenerate range gives one point interval.
pub fn partition(lo: &str, hi: &str) -> Result<Vec<(String, String)>> {
    let milli = |s: &str| -> Result<i64> {
        let v: f64 = s.trim().parse().map_err(|_| Error::Config(format!("bad number {s:?}")))?;
        let m = (v * 1000.0).round();
        if (v * 1000.0 - m).abs() > 1e-6 || m <= 0.0 {
            return Err(Error::Config(format!("sweep endpoint {s} must be a positive multiple of 0.001")));
        }
        Ok(m as i64)
    };
    let (a, b) = (milli(lo)?, milli(hi)?);
    if a > b {
        return Err(Error::Config(format!("sweep range {lo}:{hi} is reversed")));
    }
    let fmt = |m: i64| format!("{}.{:03}", m / 1000, m % 1000);
    if a == b {
        return Ok(vec![(fmt(a), fmt(b))]);
    }
    let mut out = Vec::new();
    let mut cur = a;
    while cur < b {
        let next = (cur + if cur >= 1000 { 5 } else { 1 }).min(b);
        out.push((fmt(cur), fmt(next)));
        cur = next;
    }
    Ok(out)
}

/// Runs every subinterval (in parallel); failures are recorded per interval.
/// `cfg.cache`, when set, is a directory holding one cache per interval.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<RunResult>> {
    let parts = partition(&cfg.eps_lo, &cfg.eps_hi)?;
    let configs: Vec<RunConfig> = parts
        .iter()
        .map(|(lo, hi)| {
            let mut c = cfg.clone();
            c.eps_lo = lo.clone();
            c.eps_hi = hi.clone();
            c.out = cfg.out.as_ref().map(|o| o.join(format!("{lo}_{hi}")));
            c.cache = cfg.cache.as_ref().map(|d| d.join(c.cache_name()));
            c
        })
        .collect();
    let results: Vec<RunResult> = configs
        .par_iter()
        .map(|c| match cmd_run(c) {
            Ok(r) => r.result,
            Err(e) => RunResult {
                map: Some(c.map),
                eps_lo: c.eps_lo.clone(),
                eps_hi: c.eps_hi.clone(),
                entropy_lb_str: EntropyBound::default().decimal(),
                failure: Some(e.to_string()),
                ..Default::default()
            },
        })
        .collect();
    if let Some(out) = &cfg.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("sweep.csv"), crate::report::csv_table(&results))?;
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_follows_step_policy() {
        assert_eq!(partition("1.99", "2.00").unwrap(), vec![("1.990".into(), "1.995".into()), ("1.995".into(), "2.000".into())]);
        assert_eq!(partition("2", "2").unwrap(), vec![("2.000".to_string(), "2.000".to_string())]);
        let p = partition("0.998", "1.010").unwrap();
        assert_eq!(p.len(), 4);
        assert_eq!(p[1], ("0.999".into(), "1.000".into()));
        assert_eq!(p[3], ("1.005".into(), "1.010".into()));
        assert!(partition("2.0001", "2.1").is_err());
        assert!(partition("2.1", "2.0").is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = RunConfig { eps_lo: "2.1".into(), eps_hi: "2.0".into(), ..Default::default() };
        assert!(c.validate().is_err());
        c.eps_hi = "2.2".into();
        c.validate().unwrap();
        c.d_start = 10;
        assert!(c.validate().is_err());
        c.d_start = 4;
        c.mode = Mode::Periodic;
        c.max_period = 0;
        assert!(c.validate().is_err());
        assert_eq!("auto".parse::<KPolicy>().unwrap(), KPolicy::Auto);
        assert_eq!("3.5".parse::<KPolicy>().unwrap(), KPolicy::Value(3.5));
        assert_eq!("periodic-plus-orbits".parse::<Mode>().unwrap(), Mode::PeriodicPlusOrbits);
    }
}
