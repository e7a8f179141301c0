//! One deterministic pipeline per experiment kind. Pipelines build their
//! artifacts in memory; writing and digesting happens in [`crate::manifest`].

use std::collections::BTreeMap;

use merw::graph::{GraphKind, WeightedGraph};
use merw::io::{self, fmt17, LinePlot, Scale, Table};
use merw::lattice::*;
use merw::matrix::{l1_distance, DenseMatrix};
use merw::multiparticle::*;
use merw::timedep::*;
use merw::walk::{degree_inequality_chain, detailed_balance_and_current, entropy_report, grw, merw, merw_from_pair};
use merw::{dominant_eigenpair, EigenOptions};

use crate::config::{ExperimentConfig, Kind};
use crate::error::{LabError, LabResult};

/// Emitted files in emission order, plus scalar results.
#[derive(Debug, Default, Clone)]
pub struct Artifacts {
    pub files: Vec<(String, Vec<u8>)>,
    pub metrics: BTreeMap<String, f64>,
}

impl Artifacts {
    fn table(&mut self, name: &str, t: &Table) -> LabResult<()> {
        self.files.push((name.to_string(), t.to_csv()?.into_bytes()));
        Ok(())
    }

    fn text(&mut self, name: &str, s: String) {
        self.files.push((name.to_string(), s.into_bytes()));
    }

    fn metric(&mut self, name: &str, v: f64) {
        self.metrics.insert(name.to_string(), v);
    }

    fn metrics_table(&mut self, name: &str) -> LabResult<()> {
        let rows: Vec<(&str, f64)> = self.metrics.iter().map(|(k, v)| (k.as_str(), *v)).collect();
        let t = io::metric_table(&rows);
        self.table(name, &t)
    }
}

pub fn execute(cfg: &ExperimentConfig) -> LabResult<Artifacts> {
    match cfg.kind {
        Kind::WalkCompare => walk_compare(cfg),
        Kind::Lattice1d => lattice(cfg, 1),
        Kind::Lattice2d => lattice(cfg, 2),
        Kind::Conduction => conduction(cfg),
        Kind::TimedepSwitch => timedep_switch(cfg),
        Kind::TwoParticle => two_particle(cfg),
        Kind::BoseHubbard => bose_hubbard_run(cfg),
        Kind::Refine => refine(cfg),
    }
}

/// `chain-loop`, `ring:N`, `path:N`, `segment-loops:N`, `complete:N`, or a
/// graph file path relative to the config.
pub fn graph_from_spec(cfg: &ExperimentConfig, key: &str, default: &str) -> LabResult<WeightedGraph> {
    let spec = cfg.get_str(key, default);
    let sized = |name: &str| -> LabResult<Option<usize>> {
        match spec.strip_prefix(name).and_then(|r| r.strip_prefix(':')) {
            None => Ok(None),
            Some(n) => match n.parse::<usize>() {
                Ok(n) if n >= 2 => Ok(Some(n)),
                _ => Err(cfg.invalid(key, format!("bad size in `{spec}`")).into()),
            },
        }
    };
    let undirected = |n: usize, e: Vec<(usize, usize, f64)>| -> LabResult<WeightedGraph> {
        Ok(WeightedGraph::undirected(n, GraphKind::Simple, &e)?)
    };
    if spec == "chain-loop" {
        return undirected(3, vec![(0, 1, 1.0), (1, 2, 1.0), (2, 2, 1.0)]);
    }
    if let Some(n) = sized("ring")? {
        return undirected(n, (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect());
    }
    if let Some(n) = sized("path")? {
        return undirected(n, (0..n - 1).map(|i| (i, i + 1, 1.0)).collect());
    }
    if let Some(n) = sized("segment-loops")? {
        return undirected(n, segment_edges(n));
    }
    if let Some(n) = sized("complete")? {
        let mut e = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                e.push((i, j, 1.0));
            }
        }
        return undirected(n, e);
    }
    let path = cfg.base_dir.join(spec);
    io::read_graph(&path).map_err(|e| match e {
        merw::Error::Io(m) => LabError::Config(format!("{}: {m}", path.display())),
        other => other.into(),
    })
}

fn segment_edges(n: usize) -> Vec<(usize, usize, f64)> {
    let mut e = Vec::new();
    for i in 0..n {
        e.push((i, i, 1.0));
        if i + 1 < n {
            e.push((i, i + 1, 1.0));
        }
    }
    e
}

fn physical_params(cfg: &ExperimentConfig) -> LabResult<PhysicalParams> {
    let mut p = PhysicalParams::default();
    p.beta = cfg.get("beta", p.beta)?;
    p.alpha = cfg.get("alpha", p.alpha)?;
    if !(p.beta > 0.0) || !(p.alpha > 0.0) {
        return Err(cfg.invalid(if p.beta > 0.0 { "alpha" } else { "beta" }, "beta and alpha must be positive").into());
    }
    Ok(p)
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

fn walk_compare(cfg: &ExperimentConfig) -> LabResult<Artifacts> {
    let g = graph_from_spec(cfg, "graph", "chain-loop")?;
    let beta: f64 = cfg.get("beta", 1.0)?;
    let pair = dominant_eigenpair(&g, &EigenOptions::default())?;
    let sg = grw(&g)?;
    let sm = merw_from_pair(&g, &pair);
    let rg = entropy_report(&g, &sg, beta)?;
    let rm = entropy_report(&g, &sm, beta)?;
    let mut a = Artifacts::default();
    let mut rows = io::entropy_table("grw_", &rg);
    rows.extend(io::entropy_table("merw_", &rm));
    rows.push(("lambda".into(), pair.lambda));
    rows.push(("lg_lambda".into(), pair.lambda.log2()));
    // The chain is only a theorem for symmetric weights.
    if g.is_symmetric() {
        let c = degree_inequality_chain(&g)?;
        for (k, v) in ["min_degree", "mean_degree", "entropic_degree", "chain_lambda", "max_degree"].iter().zip(c.as_array()) {
            rows.push((k.to_string(), v));
        }
    }
    for (k, v) in &rows {
        a.metric(k, *v);
    }
    a.metric("period", pair.period as f64);
    let t = io::metric_table(&rows.iter().map(|(k, v)| (k.as_str(), *v)).collect::<Vec<_>>());
    a.table("entropy.csv", &t)?;
    a.table("eigenpair.csv", &io::eigenpair_table(&pair))?;
    a.table("transition_grw.csv", &io::transition_table(&sg))?;
    a.table("transition_merw.csv", &io::transition_table(&sm))?;
    a.table("stationary_grw.csv", &io::stationary_table(&sg.stationary))?;
    a.table("stationary_merw.csv", &io::stationary_table(&sm.stationary))?;
    Ok(a)
}

fn lattice(cfg: &ExperimentConfig, dim: usize) -> LabResult<Artifacts> {
    let d: usize = cfg.get("dimension", dim)?;
    if d != dim {
        return Err(cfg.invalid("dimension", format!("{} needs dimension = {dim}", cfg.kind)).into());
    }
    let side: usize = cfg.get("side", if dim == 1 { 1000 } else { 40 })?;
    let p: f64 = cfg.get("defect_probability", if dim == 1 { 0.01 } else { 0.1 })?;
    let steps: usize = cfg.get("steps", if dim == 1 { 0 } else { 1000 })?;
    let mode = match cfg.get_str("mode", "combinatorial") {
        "combinatorial" => SchrodingerMode::Combinatorial,
        "physical" => SchrodingerMode::Physical,
        other => return Err(cfg.invalid("mode", format!("mode must be combinatorial or physical, not `{other}`")).into()),
    };
    let walk = cfg.get_str("walk", "both");
    if !["both", "grw", "merw"].contains(&walk) {
        return Err(cfg.invalid("walk", "walk must be both, grw or merw").into());
    }
    let params = physical_params(cfg)?;
    let spec = LatticeSpec::new(dim, side).map_err(|e| cfg.invalid("side", e.to_string()))?;
    if !(0.0..1.0).contains(&p) {
        return Err(cfg.invalid("defect_probability", "must lie in [0, 1)").into());
    }
    let lat = match mode {
        SchrodingerMode::Combinatorial => build_defected_lattice(&spec, p, cfg.seed)?,
        SchrodingerMode::Physical => {
            let defects = random_defects(&spec, p, cfg.seed)?;
            let height: f64 = cfg.get("defect_potential", 1.0)?;
            let v: Vec<f64> = defects.iter().map(|&d| if d { height } else { 0.0 }).collect();
            let graph = boltzmann_lattice(&spec, &v, &params)?;
            DefectedLattice { spec, defects, graph }
        }
    };
    let view = schrodinger_view(&lat.graph, &spec, mode, &params)?;
    let pi = view.pair.stationary();
    let lif = lifshitz_analysis(&lat, &view.pair);
    let deg = normalized(&lat.graph.degrees());
    let n = spec.sites();

    let mut a = Artifacts::default();
    a.metric("lambda", view.lambda);
    a.metric("energy", view.energy);
    a.metric("schrodinger_residual", view.residual);
    a.metric("defect_fraction", lat.defect_fraction());
    a.metric("lifshitz_halfwidth", lif.halfwidth);
    a.metric("lifshitz_predicted_energy", lif.predicted_energy);
    a.metric("lifshitz_measured_energy", lif.measured_energy);
    a.metric("stationary_mass_in_region", lif.mass_in_region);
    let region_mass = |rho: &[f64]| lif.region.iter().map(|&i| rho[i]).sum::<f64>();
    a.metric("grw_stationary_mass_in_region", region_mass(&deg));
    let width = if dim == 1 { 0 } else { side };

    if dim == 1 {
        let (start, len, mass) = heaviest_run(&lat.defects, &pi);
        a.metric("heaviest_run_start", start as f64);
        a.metric("heaviest_run_length", len as f64);
        a.metric("heaviest_run_mass", mass);
        a.table("stationary_merw.csv", &io::field_table(&pi, 0))?;
        a.table("stationary_grw.csv", &io::field_table(&deg, 0))?;
        let plot = LinePlot::new("stationary density", "x", "pi")
            .log_y(true)
            .series("MERW", pi.iter().enumerate().map(|(i, v)| (i as f64, *v)).collect())
            .series("GRW", deg.iter().enumerate().map(|(i, v)| (i as f64, *v)).collect());
        a.text("profile.svg", plot.to_svg());
    } else {
        a.table("stationary_merw.csv", &io::field_table(&pi, width))?;
        a.text("stationary_merw.pgm", io::pgm(side, side, &pi, Scale::Log)?);
    }

    if steps > 0 {
        let start = match dim {
            1 => side / 2,
            _ => spec.index(side / 2, side / 2),
        };
        let rho0 = delta_density(n, start);
        let mut runs: Vec<(&str, merw::walk::StochasticMatrix)> = Vec::new();
        if walk != "merw" {
            runs.push(("grw", grw(&lat.graph)?));
        }
        if walk != "grw" {
            runs.push(("merw", merw_from_pair(&lat.graph, &view.pair)));
        }
        let mut masses = Vec::new();
        for (name, s) in &runs {
            let tr = density_evolution(s, &rho0, &[steps])?;
            let rho = tr.at(steps).unwrap();
            let mass = region_mass(rho);
            masses.push(mass);
            a.metric(&format!("{name}_mass_in_region"), mass);
            a.metric(&format!("{name}_l1_to_stationary"), l1_distance(rho, &s.stationary));
            a.table(&format!("density_{name}.csv"), &io::field_table(rho, width))?;
            if dim == 2 {
                a.text(&format!("density_{name}.pgm"), io::pgm(side, side, rho, Scale::Log)?);
            }
        }
        if runs.len() == 1 {
            a.metric("mass_in_region", masses[0]);
        } else {
            a.metric("mass_ratio", masses[1] / masses[0]);
        }
        a.metric("steps", steps as f64);
    }
    a.table("defects.csv", &io::field_table(&lat.defects.iter().map(|&d| d as u8 as f64).collect::<Vec<_>>(), width))?;
    a.metrics_table("metrics.csv")?;
    Ok(a)
}

fn conduction(cfg: &ExperimentConfig) -> LabResult<Artifacts> {
    let side: usize = cfg.get("side", 40)?;
    let p: f64 = cfg.get("defect_probability", 0.1)?;
    let spec = LatticeSpec::new(2, side).map_err(|e| cfg.invalid("side", e.to_string()))?;
    let lat = directed_conduction_lattice(&spec, p, cfg.seed)?;
    let s = merw(&lat.graph)?;
    let currents = row_currents(&spec, &s);
    let report = detailed_balance_and_current(&s);
    let mut sorted = currents.clone();
    sorted.sort_by(f64::total_cmp);
    let mut a = Artifacts::default();
    a.metric("min_row_current", sorted[0]);
    a.metric("max_row_current", *sorted.last().unwrap());
    a.metric("median_row_current", sorted[sorted.len() / 2]);
    a.metric("kirchhoff_residual", report.kirchhoff_residual);
    a.metric("defect_fraction", lat.defect_fraction());
    let mut t = Table::new(&["row", "current"]);
    for (y, c) in currents.iter().enumerate() {
        t.push(vec![y.to_string(), fmt17(*c)]);
    }
    a.table("row_currents.csv", &t)?;
    a.table("stationary.csv", &io::field_table(&s.stationary, side))?;
    a.text("stationary.pgm", io::pgm(side, side, &s.stationary, Scale::Log)?);
    a.metrics_table("metrics.csv")?;
    Ok(a)
}

/// `correlation(m d²⟨x⟩/dt², ⟨∇V⟩)` over `[lo, hi]`.
pub fn ehrenfest_correlation(trace: &ObservableTrace, mass: f64, lo: usize, hi: usize) -> f64 {
    let (acc, grad): (Vec<f64>, Vec<f64>) = trace
        .acceleration()
        .into_iter()
        .filter(|&(t, _)| (lo..=hi).contains(&t))
        .map(|(t, x)| (mass * x, trace.mean_grad_v[t]))
        .unzip();
    correlation(&acc, &grad)
}

fn timedep_switch(cfg: &ExperimentConfig) -> LabResult<Artifacts> {
    let sites: usize = cfg.get("sites", 80)?;
    let steps: usize = cfg.get("steps", 2000)?;
    let lo: usize = cfg.get("switch_start", steps / 4)?;
    let hi: usize = cfg.get("switch_end", 3 * steps / 4)?;
    let stride: usize = cfg.get("gap_stride", (steps / 40).max(1))?;
    if stride == 0 {
        return Err(cfg.invalid("gap_stride", "must be positive").into());
    }
    let params = physical_params(cfg)?;
    let sch = WellSwitch::new(sites, steps, lo, hi).schedule(&params)?;
    let pair = solve_amplitudes(&sch)?;
    let trace = observable_trace(&pair, &sch)?;
    let gaps = adiabatic_gaps(&pair, &sch, stride)?;
    let continuity = (lo..hi.min(steps))
        .map(|t| continuity_residual(&pair, &sch, t).iter().fold(0.0f64, |m, v| m.max(v.abs())))
        .fold(0.0, f64::max);

    let mut a = Artifacts::default();
    a.metric("normalization_error", pair.normalization_error());
    a.metric("ehrenfest_correlation", ehrenfest_correlation(&trace, params.mass, lo, hi));
    a.metric("max_continuity_residual", continuity);
    a.metric("max_density_error", trace.density_error.iter().cloned().fold(0.0, f64::max));
    a.metric("mean_x_start", trace.mean_x[0]);
    a.metric("mean_x_end", *trace.mean_x.last().unwrap());
    a.metric("max_adiabatic_gap", gaps.iter().map(|g| g.1).fold(0.0, f64::max));
    a.metric("epsilon", sch.epsilon());
    a.table("trace.csv", &io::trace_table(&trace, &gaps))?;

    let rows: Vec<usize> = (0..=steps).step_by(stride).collect();
    let field: Vec<f64> = rows.iter().flat_map(|&t| pair.density(t)).collect();
    a.text("density.pgm", io::pgm(sites, rows.len(), &field, Scale::Linear)?);
    let plot = LinePlot::new("well switch", "t", "<x>")
        .series("<x>", trace.time.iter().cloned().zip(trace.mean_x.iter().cloned()).collect());
    a.text("mean_x.svg", plot.to_svg());
    a.metrics_table("metrics.csv")?;
    Ok(a)
}

fn two_particle(cfg: &ExperimentConfig) -> LabResult<Artifacts> {
    let side: usize = cfg.get("side", 12)?;
    let particles: usize = cfg.get("particles", 2)?;
    let c: f64 = cfg.get("repulsion", 3.0)?;
    let beta: f64 = cfg.get("beta", 1.0)?;
    let rule = match cfg.get_str("rule", "single-hop") {
        "single-hop" => HopRule::SingleHop,
        "product" => HopRule::Product,
        other => return Err(cfg.invalid("rule", format!("rule must be single-hop or product, not `{other}`")).into()),
    };
    if side < 2 {
        return Err(cfg.invalid("side", "need at least two sites").into());
    }
    let base = WeightedGraph::undirected(side, GraphKind::Simple, &segment_edges(side))?;
    let pot = PairPotentials {
        node: None,
        pair: Some(DenseMatrix::from_fn(side, side, |x, y| c / (1.0 + (x as f64 - y as f64).abs()))),
    };
    let cg = build_distinguishable(&base, particles, &pot, beta, rule)?;
    let pi = stationary_density(&cg)?;
    let red = reduce_indistinguishable(&cg)?;
    let pr = stationary_density(&red)?;
    let marginal = cg.marginal(&pi, 0);
    let reduced_marginal = red.marginal(&pr, 0);

    let mut a = Artifacts::default();
    a.metric("configurations", cg.len() as f64);
    a.metric("reduced_configurations", red.len() as f64);
    a.metric("marginal_reduction_error", marginal.iter().zip(&reduced_marginal).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    if particles >= 2 {
        let (mut e1, mut e2, mut e12) = (0.0, 0.0, 0.0);
        for (cfgv, p) in cg.configs.iter().zip(&pi) {
            e1 += p * cfgv[0] as f64;
            e2 += p * cfgv[1] as f64;
            e12 += p * (cfgv[0] * cfgv[1]) as f64;
        }
        a.metric("position_covariance", e12 - e1 * e2);
    }
    if particles == 2 {
        a.table("joint.csv", &io::field_table(&pi, side))?;
        a.text("joint.pgm", io::pgm(side, side, &pi, Scale::Linear)?);
    }
    a.table("marginal.csv", &io::field_table(&marginal, 0))?;
    a.table("marginal_reduced.csv", &io::field_table(&reduced_marginal, 0))?;
    let plot = LinePlot::new("one-particle density", "x", "pi(x)")
        .series("marginal", marginal.iter().enumerate().map(|(i, v)| (i as f64, *v)).collect());
    a.text("marginal.svg", plot.to_svg());
    a.metrics_table("metrics.csv")?;
    Ok(a)
}

fn particle_range(cfg: &ExperimentConfig) -> LabResult<Vec<usize>> {
    let raw = cfg.get_str("particles", "2");
    let parse = |s: &str| s.trim().parse::<usize>().map_err(|_| LabError::from(cfg.invalid("particles", format!("bad particle count `{s}`"))));
    match raw.split_once('-') {
        Some((a, b)) => {
            let (a, b) = (parse(a)?, parse(b)?);
            if a > b {
                return Err(cfg.invalid("particles", "empty range").into());
            }
            Ok((a..=b).collect())
        }
        None => Ok(vec![parse(raw)?]),
    }
}

fn bose_hubbard_run(cfg: &ExperimentConfig) -> LabResult<Artifacts> {
    let g = graph_from_spec(cfg, "graph", "ring:6")?;
    let t: f64 = cfg.get("t_hop", 1.0)?;
    let u: f64 = cfg.get("U", 0.0)?;
    let n_max: usize = cfg.get("n_max", 2)?;
    let sectors = particle_range(cfg)?;
    let sector: usize = cfg.get("sector", *sectors.last().unwrap())?;
    if !sectors.contains(&sector) {
        return Err(cfg.invalid("sector", format!("sector {sector} outside particle range")).into());
    }
    let spec = BoseHubbardSpec::new(t, u, n_max).map_err(|e| cfg.invalid("t_hop", e.to_string()))?;
    let bh = bose_hubbard(&g, &spec, &sectors)?;
    let grounds = bh.ground_states()?;
    let mut a = Artifacts::default();
    let mut et = Table::new(&["particles", "dimension", "energy"]);
    for gs in &grounds {
        let d = bh.basis.sector_range(gs.particles).unwrap().len();
        et.push(vec![gs.particles.to_string(), d.to_string(), fmt17(gs.energy)]);
        a.metric(&format!("energy_{}", gs.particles), gs.energy);
    }
    let chosen = grounds.iter().find(|g| g.particles == sector).unwrap();
    let offset = bh.basis.sector_range(sector).unwrap().start;
    a.metric("fock_dimension", bh.basis.len() as f64);
    a.table("energies.csv", &et)?;
    a.table("fock.csv", &io::fock_table(&bh.basis, offset, &chosen.vector))?;
    a.metrics_table("metrics.csv")?;
    Ok(a)
}

fn refine(cfg: &ExperimentConfig) -> LabResult<Artifacts> {
    let params = physical_params(cfg)?;
    let which = cfg.get_str("potential", "harmonic");
    let (f, reference): (Box<dyn Fn(f64) -> f64 + Sync>, Option<f64>) = match which {
        "harmonic" => {
            let w = params.omega;
            let m = params.mass;
            (Box::new(move |x| 0.5 * m * w * w * x * x), Some(0.5 * params.hbar * w))
        }
        "double-well" => (Box::new(|x: f64| (x * x - 1.0).powi(2)), None),
        other => return Err(cfg.invalid("potential", format!("unknown potential `{other}`")).into()),
    };
    let lo: f64 = cfg.get("lo", -8.0)?;
    let hi: f64 = cfg.get("hi", 8.0)?;
    let sizes: Vec<usize> = cfg.get_list("sizes", &[80, 160, 320, 640, 1280])?;
    let table = refine_and_compare(&*f, lo, hi, &sizes, &params, reference)?;
    let mut a = Artifacts::default();
    let mut t = Table::new(&["sites", "delta", "epsilon", "energy", "l2_to_finest", "row_sum_error", "chapman_kolmogorov_error", "mass_ratio"]);
    for r in &table.rows {
        t.push(vec![
            r.sites.to_string(),
            fmt17(r.delta),
            fmt17(r.epsilon),
            fmt17(r.energy),
            fmt17(r.l2_to_finest),
            fmt17(r.row_sum_error),
            fmt17(r.chapman_kolmogorov_error),
            fmt17(r.mass_ratio),
        ]);
    }
    a.table("refinement.csv", &t)?;
    a.metric("order", table.order);
    let finest = table.rows.iter().max_by_key(|r| r.sites).unwrap();
    a.metric("finest_energy", finest.energy);
    let grid = Grid1d::new(lo, hi, finest.sites)?;
    let u = stationary_uncertainty(&grid, &grid.sample(&*f), &params)?;
    a.metric("uncertainty_product", u.product);
    a.metric("uncertainty_discrete_bound", u.discrete_bound);
    let reference_e = reference.unwrap_or(finest.energy);
    let plot = LinePlot::new("energy error", "delta", "|E - E_ref|").log_y(true).series(
        "E_eps",
        table.rows.iter().map(|r| (r.delta, (r.energy - reference_e).abs())).collect(),
    );
    a.text("convergence.svg", plot.to_svg());
    a.table("psi_finest.csv", &io::field_table(&finest.psi, 0))?;
    a.metrics_table("metrics.csv")?;
    Ok(a)
}
