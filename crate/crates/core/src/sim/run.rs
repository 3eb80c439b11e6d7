use rand::Rng;
use rayon::prelude::*;

use super::config::{ExperimentConfig, Level, Scheme};
use super::link::{at_snr, detect_users, estimate_priors, random_streams, Link};
use crate::detect::{analytic_ber, clamp_prior, optimize_lambda_with, LambdaSearch};
use crate::error::{Error, Result};
use crate::events::{assemble_values, frame_to_streams, tile_geometry};
use crate::rng::{domain, substream};
use crate::snn::{
    encode_analog, encode_digital, forward, train_toy, NetInput, Schedule, SnnNetwork, ToyDataset,
    TrainConfig,
};
use crate::tx::gen_th_code;

/// Two-sided 99% normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Ber,
    Accuracy,
    CollisionRate,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Ber => "ber",
            Metric::Accuracy => "accuracy",
            Metric::CollisionRate => "collision-rate",
        }
    }
}

/// One point of an experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub scheme: Scheme,
    pub snr_db: Option<f64>,
    pub frames_per_bit: usize,
    pub pulses_per_frame: usize,
    pub metric: Metric,
    /// Empirical value; `None` for analytic-only rows.
    pub value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub successes: u64,
    pub total: u64,
    pub trials: usize,
    pub seed: u64,
    pub analytic: Option<f64>,
    /// Mean prior, bias and threshold used by the detector (BER rows).
    pub prior: Option<f64>,
    pub lambda_star: Option<f64>,
    pub eta: Option<f64>,
}

impl ResultRecord {
    fn new(cfg: &ExperimentConfig, metric: Metric, snr_db: Option<f64>) -> Self {
        ResultRecord {
            scheme: cfg.scheme,
            snr_db,
            frames_per_bit: cfg.link.frames_per_bit,
            pulses_per_frame: cfg.link.pulses_per_frame,
            metric,
            value: None,
            ci_low: None,
            ci_high: None,
            successes: 0,
            total: 0,
            trials: cfg.trials,
            seed: cfg.seed,
            analytic: None,
            prior: None,
            lambda_star: None,
            eta: None,
        }
    }

    fn with_counts(mut self, k: u64, n: u64) -> Self {
        let (lo, hi) = wilson_interval(k, n, Z99);
        self.successes = k;
        self.total = n;
        self.value = Some(if n == 0 { 0.0 } else { k as f64 / n as f64 });
        self.ci_low = Some(lo);
        self.ci_high = Some(hi);
        self
    }
}

fn trial_seed(master: u64, point: usize, trial: usize) -> u64 {
    substream(master, &[domain::TRIAL, point as u64, trial as u64]).random()
}

fn link_for(cfg: &ExperimentConfig, snr_db: f64) -> Result<Link> {
    Ok(Link {
        cfg: at_snr(&cfg.link, snr_db),
        channel: cfg.channel_params()?,
        scheme: cfg.scheme,
        level: cfg.level,
        noise: cfg.detector.noise,
    })
}

fn search(cfg: &ExperimentConfig) -> LambdaSearch {
    LambdaSearch {
        lambda_max: cfg.detector.lambda_max,
        grid_points: cfg.detector.grid_points,
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct TrialTally {
    errors: u64,
    bits: u64,
    analytic: f64,
    prior: f64,
    lambda: f64,
    eta: f64,
    links: u64,
}

impl TrialTally {
    fn add(&mut self, o: &TrialTally) {
        self.errors += o.errors;
        self.bits += o.bits;
        self.analytic += o.analytic;
        self.prior += o.prior;
        self.lambda += o.lambda;
        self.eta += o.eta;
        self.links += o.links;
    }
}

fn ber_trial(cfg: &ExperimentConfig, link: &Link, seed: u64) -> Result<TrialTally> {
    let users = cfg.link.users;
    let p = cfg.source.activation;
    let mut t = TrialTally::default();
    if cfg.dry_run {
        let sets = link.fingers(&link.channels(seed)?)?;
        for set in &sets {
            let m = link.moments(set)?;
            let (prior, lambda, eta, ber) = if cfg.scheme.is_ppm() {
                let e = analytic_ber(1.0, 0.5, cfg.link.frames_per_bit, m.mu, m.sigma)?;
                (0.5, 1.0, e.eta, e.ber)
            } else {
                let prior = clamp_prior(p);
                let o = optimize_lambda_with(
                    prior,
                    cfg.link.frames_per_bit,
                    m.mu,
                    m.sigma,
                    &search(cfg),
                )?;
                (prior, o.lambda, o.eta, o.ber)
            };
            t.prior += prior;
            t.lambda += lambda;
            t.eta += eta;
            t.analytic += ber;
            t.links += 1;
        }
        return Ok(t);
    }
    let streams = random_streams(users, cfg.source.bits, p, seed);
    let stats = link.transmit(&streams, seed)?;
    let priors = estimate_priors(&stats, cfg.detector.prior, &vec![p; users])?;
    let (rx, decisions) = detect_users(&stats, cfg.scheme, &priors, &search(cfg))?;
    for ((tx, got), d) in streams.iter().zip(&rx).zip(&decisions) {
        t.errors += tx
            .bits
            .iter()
            .zip(&got.bits)
            .filter(|(a, b)| a != b)
            .count() as u64;
        t.bits += tx.len() as u64;
        t.analytic += d.analytic_ber;
        t.prior += d.prior;
        t.lambda += d.lambda;
        t.eta += d.eta;
        t.links += 1;
    }
    Ok(t)
}

/// Run independent trials of `f` and fold them in trial order.
fn run_trials<F>(trials: usize, f: F) -> Result<TrialTally>
where
    F: Fn(usize) -> Result<TrialTally> + Sync + Send,
{
    let parts: Vec<Result<TrialTally>> = (0..trials).into_par_iter().map(f).collect();
    let mut total = TrialTally::default();
    for p in parts {
        total.add(&p?);
    }
    Ok(total)
}

/// BER versus SNR with an analytic overlay. The analytic value, bias and
/// threshold are averaged over the links of all trials.
pub fn run_ber_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    if cfg.scheme == Scheme::Baseline {
        return Err(Error::Config(
            "the baseline scheme has no link to sweep".into(),
        ));
    }
    let mut out = Vec::with_capacity(cfg.snr_db.len());
    for (i, &snr) in cfg.snr_db.iter().enumerate() {
        let link = link_for(cfg, snr)?;
        let t = run_trials(cfg.trials, |trial| {
            ber_trial(cfg, &link, trial_seed(cfg.seed, i, trial))
        })?;
        let links = t.links.max(1) as f64;
        let mut r = ResultRecord::new(cfg, Metric::Ber, Some(snr));
        if !cfg.dry_run {
            r = r.with_counts(t.errors, t.bits);
        }
        r.analytic = Some(t.analytic / links);
        r.prior = Some(t.prior / links);
        r.lambda_star = Some(t.lambda / links);
        r.eta = Some(t.eta / links);
        out.push(r);
    }
    Ok(out)
}

/// `1 - (1 - q (1 - C(N_h - N_p, N_p) / C(N_h, N_p)))^(K - 1)`.
pub fn analytic_collision_probability(
    users: usize,
    chips: usize,
    pulses: usize,
    activity: f64,
) -> f64 {
    if users < 2 {
        return 0.0;
    }
    // C(N_h - N_p, N_p) / C(N_h, N_p) = prod_{i<N_p} (N_h - N_p - i) / (N_h - i)
    let disjoint: f64 = (0..pulses)
        .map(|i| {
            let num = chips as f64 - pulses as f64 - i as f64;
            if num <= 0.0 {
                0.0
            } else {
                num / (chips - i) as f64
            }
        })
        .product();
    1.0 - (1.0 - activity * (1.0 - disjoint)).powi(users as i32 - 1)
}

/// Probability that an active frame of user 0 shares a chip with another
/// active user, measured against the analytic value.
pub fn run_collision_analysis(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    cfg.validate()?;
    let link = &cfg.link;
    let activity = if cfg.scheme.is_ppm() || cfg.collisions.all_active {
        1.0
    } else {
        cfg.source.activation
    };
    let n_f = link.frames_per_bit;
    let n_bits = cfg.collisions.frames.div_ceil(n_f);
    let codes = (0..link.users)
        .map(|k| gen_th_code(cfg.seed, k, link, n_bits))
        .collect::<Result<Vec<_>>>()?;
    let streams = random_streams(link.users, n_bits, activity, cfg.seed);
    let (mut hits, mut total) = (0u64, 0u64);
    let mut seen = 0usize;
    'outer: for n in 0..n_bits {
        for j in 0..n_f {
            if seen == cfg.collisions.frames {
                break 'outer;
            }
            seen += 1;
            if streams[0].bits[n] == 0 {
                continue;
            }
            total += 1;
            let mine = codes[0].chips(n, j);
            let hit = (1..link.users)
                .filter(|&k| streams[k].bits[n] == 1)
                .any(|k| codes[k].chips(n, j).iter().any(|c| mine.contains(c)));
            hits += hit as u64;
        }
    }
    let mut r = ResultRecord::new(cfg, Metric::CollisionRate, None).with_counts(hits, total);
    r.analytic = Some(analytic_collision_probability(
        link.users,
        link.chips_per_frame(),
        link.pulses_per_frame,
        activity,
    ));
    Ok(r)
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<ToyDataset> {
    let mut d = match &cfg.snn.dataset {
        Some(path) => ToyDataset::parse(&std::fs::read_to_string(path)?)?,
        None => crate::snn::bundled_test(),
    };
    if let Some(n) = cfg.snn.samples {
        d.samples.truncate(n);
    }
    Ok(d)
}

/// Network input for one frame after the configured link and encoder.
pub fn receive_frame(
    cfg: &ExperimentConfig,
    link: &Link,
    frame: &crate::events::EventFrame,
    seed: u64,
) -> Result<NetInput> {
    let (h, w) = (frame.height(), frame.width());
    let n_f = cfg.link.frames_per_bit;
    if cfg.scheme == Scheme::Baseline {
        return Ok(encode_digital(frame, n_f));
    }
    let k = cfg.link.users;
    let streams = frame_to_streams(frame, k)?;
    let stats = link.transmit(&streams, seed)?;
    if cfg.scheme.is_analog() {
        return Ok(encode_analog(&stats, h, w)?.to_input());
    }
    let truth: Vec<f64> = streams
        .iter()
        .map(|s| s.ones() as f64 / s.len() as f64)
        .collect();
    let priors = estimate_priors(&stats, cfg.detector.prior, &truth)?;
    let (rx, _) = detect_users(&stats, cfg.scheme, &priors, &search(cfg))?;
    // Detection errors can light both polarities of a pixel, which no
    // valid frame holds; the network sees the bits as detected.
    let refs: Vec<&[u8]> = rx.iter().map(|s| s.bits.as_slice()).collect();
    let x: Vec<f64> = assemble_values(&refs, k, h, w)?
        .into_iter()
        .map(f64::from)
        .collect();
    NetInput::new(vec![x; n_f])
}

/// Received inputs for every sample at one SNR, for fine-tuning a network on
/// channel-corrupted data. Draws come from their own substreams, disjoint
/// from the evaluation trials of every grid point.
pub fn channel_dataset(
    cfg: &ExperimentConfig,
    data: &ToyDataset,
    snr_db: f64,
    point: usize,
) -> Result<Vec<(NetInput, usize)>> {
    let link = link_for(cfg, snr_db)?;
    data.samples
        .par_iter()
        .enumerate()
        .map(|(s, smp)| {
            let seed = substream(cfg.seed, &[domain::FINE_TUNE, point as u64, s as u64]).random();
            Ok((receive_frame(cfg, &link, &smp.frame, seed)?, smp.label))
        })
        .collect()
}

fn e2e_dataset(cfg: &ExperimentConfig, net: &SnnNetwork) -> Result<ToyDataset> {
    cfg.validate()?;
    let mut data = load_dataset(cfg)?;
    if data.is_empty() {
        return Err(Error::Config("e2e dataset is empty".into()));
    }
    tile_geometry(cfg.link.users, data.height, data.width)?;
    if net.inputs() != data.height * data.width * 2 || net.classes() != data.classes {
        return Err(Error::Config(format!(
            "network maps {} inputs to {} classes, dataset has {}x{}x2 frames and {} classes",
            net.inputs(),
            net.classes(),
            data.height,
            data.width,
            data.classes
        )));
    }
    data.samples.truncate(cfg.trials);
    Ok(data)
}

fn e2e_point(
    cfg: &ExperimentConfig,
    net: &SnnNetwork,
    data: &ToyDataset,
    point: usize,
) -> Result<ResultRecord> {
    let snr = cfg.snr_db[point];
    let link = link_for(cfg, snr)?;
    let schedule = Schedule {
        steps_per_slice: cfg.snn.steps_per_slice,
        presentation: cfg.snn.presentation,
    };
    let hits: Vec<Result<bool>> = data
        .samples
        .par_iter()
        .enumerate()
        .map(|(s, smp)| {
            let x = receive_frame(cfg, &link, &smp.frame, trial_seed(cfg.seed, point, s))?;
            Ok(forward(net, &x, &schedule)?.label() == smp.label)
        })
        .collect();
    let mut k = 0u64;
    for h in hits {
        k += h? as u64;
    }
    let n = data.len();
    let mut r = ResultRecord::new(cfg, Metric::Accuracy, Some(snr)).with_counts(k, n as u64);
    r.trials = n;
    Ok(r)
}

/// Classification accuracy of the full frame-to-label chain per SNR point.
/// Each trial is one dataset frame; `trials` caps the frames used.
pub fn run_e2e_trial(cfg: &ExperimentConfig, net: &SnnNetwork) -> Result<Vec<ResultRecord>> {
    let data = e2e_dataset(cfg, net)?;
    (0..cfg.snr_db.len())
        .map(|i| e2e_point(cfg, net, &data, i))
        .collect()
}

/// As [`run_e2e_trial`], but at every SNR point `net` is first fine-tuned on
/// `train` received through the same link. Returns the records and the
/// network used at each point.
pub fn run_e2e_adapted(
    cfg: &ExperimentConfig,
    net: &SnnNetwork,
    train: &ToyDataset,
    tc: &TrainConfig,
) -> Result<(Vec<ResultRecord>, Vec<SnnNetwork>)> {
    let data = e2e_dataset(cfg, net)?;
    let mut records = Vec::with_capacity(cfg.snr_db.len());
    let mut nets = Vec::with_capacity(cfg.snr_db.len());
    for (i, &snr) in cfg.snr_db.iter().enumerate() {
        let tuned = train_toy(net, &channel_dataset(cfg, train, snr, i)?, tc)?.network;
        records.push(e2e_point(cfg, &tuned, &data, i)?);
        nets.push(tuned);
    }
    Ok((records, nets))
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn header(cfg: &ExperimentConfig, what: &str) -> String {
    let level = match cfg.level {
        Level::Waveform => "waveform",
        Level::Statistic => "statistic",
    };
    format!(
        "# impulse-rake {what}\n# scheme: {}\n# level: {level}\n# channel: {}\n# snr_definition: \"snr_db = 10*log10(E_s/N_0), unit-power channel, energy per {}\"\n# trials: {}\n# seed: {}\n# config_sha256: {}\n",
        cfg.scheme.name(),
        cfg.channel,
        match cfg.link.energy_mode {
            crate::tx::EnergyMode::PerPulse => "pulse",
            crate::tx::EnergyMode::PerBit => "bit",
        },
        cfg.trials,
        cfg.seed,
        cfg.hash()
    )
}

/// BER sweep CSV with a commented header.
pub fn ber_sweep_csv(cfg: &ExperimentConfig, records: &[ResultRecord]) -> String {
    let mut s = header(cfg, "ber-sweep");
    s.push_str("snr_db,p,lambda_star,eta,analytic_ber,empirical_ber,ci_low,ci_high\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            opt(r.snr_db),
            opt(r.prior),
            opt(r.lambda_star),
            opt(r.eta),
            opt(r.analytic),
            opt(r.value),
            opt(r.ci_low),
            opt(r.ci_high)
        ));
    }
    s
}

/// Generic record CSV with a commented header.
pub fn records_csv(cfg: &ExperimentConfig, what: &str, records: &[ResultRecord]) -> String {
    let mut s = header(cfg, what);
    s.push_str(
        "scheme,snr_db,n_f,n_p,metric,value,ci_low,ci_high,successes,total,trials,seed,analytic\n",
    );
    for r in records {
        s.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.scheme.name(),
            opt(r.snr_db),
            r.frames_per_bit,
            r.pulses_per_frame,
            r.metric.name(),
            opt(r.value),
            opt(r.ci_low),
            opt(r.ci_high),
            r.successes,
            r.total,
            r.trials,
            r.seed,
            opt(r.analytic)
        ));
    }
    s
}
