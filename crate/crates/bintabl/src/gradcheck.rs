//! Central finite-difference verification of every analytic gradient.
//!
//! The check perturbs each parameter entry (and each input entry) by ±h,
//! re-evaluates a scalar probe loss, and compares the two-sided difference
//! quotient against the analytic gradient. The probe is a fixed random
//! linear functional of the outputs for single layers and the weighted
//! cross-entropy for whole networks. Entries whose gradient is discarded
//! by construction (the pinned attention diagonal) are skipped.

use crate::error::Result;
use crate::layers::network::{build_network, Arch, NormKind, CLASSES, INPUT_FEATURES, INPUT_STEPS};
use crate::matrix::Matrix;
use crate::norm::{BatchNormParams, BinParams, DainParams};
use crate::params::SlotMut;
use crate::rng::Rng;
use crate::train::loss::{weighted_cross_entropy, ClassWeights};

pub const DEFAULT_TOL: f64 = 1e-5;
const STEP: f64 = 1e-5;
/// Relative error denominators are floored here so that finite-difference
/// noise on near-zero gradients does not register as disagreement.
const SCALE_FLOOR: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Target {
    Bin,
    BinLiteral,
    Dain,
    BatchNorm,
    Bilinear,
    Tabl,
    Network(Arch, NormKind),
}

impl std::fmt::Display for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Target::Bin => write!(f, "bin"),
            Target::BinLiteral => write!(f, "bin(literal)"),
            Target::Dain => write!(f, "dain"),
            Target::BatchNorm => write!(f, "bn"),
            Target::Bilinear => write!(f, "bl"),
            Target::Tabl => write!(f, "tabl"),
            Target::Network(arch, norm) => write!(f, "{norm}-{arch}(TABL)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GroupResult {
    pub name: String,
    pub entries: usize,
    pub max_rel_err: f64,
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub target: String,
    pub shape: (usize, usize),
    pub seed: u64,
    pub tol: f64,
    pub groups: Vec<GroupResult>,
}

impl CheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.max_rel_err)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_rel_err() < self.tol
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = Vec::new();
        for g in &self.groups {
            out.push(format!(
                "{} {}x{} seed {} group {:<16} max_rel_err {:.3e} [{}]",
                self.target,
                self.shape.0,
                self.shape.1,
                self.seed,
                g.name,
                g.max_rel_err,
                if g.max_rel_err < self.tol { "PASS" } else { "FAIL" }
            ));
        }
        out
    }
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(SCALE_FLOOR)
}

/// Probe loss for layer-level checks: sum over samples of <output, R>.
fn probe_loss(outputs: &[Matrix], probes: &[Matrix]) -> Result<f64> {
    let mut total = 0.0;
    for (o, r) in outputs.iter().zip(probes) {
        total += o.frob_dot(r)?;
    }
    Ok(total)
}

/// Generic driver: compares `analytic` (name → gradient values, aligned
/// with the subject's same-named slots) against central differences of
/// `loss`, then does the same for the input batch.
#[allow(clippy::too_many_arguments)]
fn drive<S: Clone>(
    target: Target,
    shape: (usize, usize),
    seed: u64,
    tol: f64,
    subject: &S,
    inputs: &[Matrix],
    slots_mut_of: impl Fn(&mut S) -> Vec<SlotMut<'_>>,
    loss_of: impl Fn(&S, &[Matrix]) -> Result<f64>,
    analytic: Vec<(String, Vec<f64>)>,
    analytic_input: &[Matrix],
) -> Result<CheckReport> {
    let mut groups = Vec::new();

    for (name, grad) in &analytic {
        let (pinned, len, cols) = {
            let mut probe = subject.clone();
            let slots = slots_mut_of(&mut probe);
            let slot = slots
                .into_iter()
                .find(|s| &s.name == name)
                .unwrap_or_else(|| panic!("no slot named {name}"));
            (slot.pinned_diag, slot.values.len(), slot.cols)
        };
        assert_eq!(len, grad.len(), "gradient length mismatch for {name}");

        let mut max_err = 0.0f64;
        let mut entries = 0usize;
        for (i, &analytic_value) in grad.iter().enumerate() {
            if pinned && i / cols == i % cols {
                continue; // held fixed; gradient discarded by construction
            }
            let eval = |delta: f64| -> Result<f64> {
                let mut probe = subject.clone();
                {
                    let mut slots = slots_mut_of(&mut probe);
                    let slot = slots.iter_mut().find(|s| &s.name == name).unwrap();
                    slot.values[i] += delta;
                }
                loss_of(&probe, inputs)
            };
            let numeric = (eval(STEP)? - eval(-STEP)?) / (2.0 * STEP);
            max_err = max_err.max(rel_err(analytic_value, numeric));
            entries += 1;
        }
        groups.push(GroupResult {
            name: name.clone(),
            entries,
            max_rel_err: max_err,
        });
    }

    // Input gradients.
    let mut max_err = 0.0f64;
    let mut entries = 0usize;
    for (s, gi) in analytic_input.iter().enumerate() {
        for r in 0..gi.rows() {
            for c in 0..gi.cols() {
                let eval = |delta: f64| -> Result<f64> {
                    let mut xs = inputs.to_vec();
                    let v = xs[s].get(r, c);
                    xs[s].set(r, c, v + delta);
                    loss_of(subject, &xs)
                };
                let numeric = (eval(STEP)? - eval(-STEP)?) / (2.0 * STEP);
                max_err = max_err.max(rel_err(gi.get(r, c), numeric));
                entries += 1;
            }
        }
    }
    groups.push(GroupResult {
        name: "input".to_string(),
        entries,
        max_rel_err: max_err,
    });

    Ok(CheckReport {
        target: target.to_string(),
        shape,
        seed,
        tol,
        groups,
    })
}

fn random_batch(rng: &mut Rng, n: usize, d: usize, t: usize) -> Vec<Matrix> {
    (0..n)
        .map(|_| Matrix::from_fn(d, t, |_, _| rng.normal()))
        .collect()
}

fn probes(rng: &mut Rng, like: &[Matrix]) -> Vec<Matrix> {
    like.iter()
        .map(|m| Matrix::from_fn(m.rows(), m.cols(), |_, _| rng.uniform(-1.0, 1.0)))
        .collect()
}

/// Run one finite-difference check. `d`, `t` set the sample shape for
/// layer targets and are ignored for whole networks (fixed 40×10).
pub fn check(target: Target, d: usize, t: usize, seed: u64, tol: f64) -> Result<CheckReport> {
    let mut rng = Rng::derive(seed, 0x6764); // gradcheck stream
    match target {
        Target::Bin | Target::BinLiteral => {
            let (d, t) = if target == Target::BinLiteral { (t, t) } else { (d, t) };
            let mut p = BinParams::new(d, t);
            p.literal_feature_divisor = target == Target::BinLiteral;
            for g in p.gamma2.iter_mut().chain(p.gamma1.iter_mut()) {
                *g = rng.uniform(0.5, 1.5);
            }
            for b in p.beta2.iter_mut().chain(p.beta1.iter_mut()) {
                *b = rng.uniform(-0.5, 0.5);
            }
            p.lambda1 = rng.uniform(0.2, 0.8);
            p.lambda2 = rng.uniform(0.2, 0.8);
            let xs = random_batch(&mut rng, 3, d, t);
            let rs = probes(&mut rng, &xs);
            let (_, cache) = p.forward(&xs)?;
            let (grad_in, grads) = p.backward(&rs, &cache)?;
            let analytic = grads
                .slots()
                .into_iter()
                .map(|g| (g.name, g.values.to_vec()))
                .collect();
            drive(
                target,
                (d, t),
                seed,
                tol,
                &p,
                &xs,
                |p| p.slots_mut(),
                |p, xs| probe_loss(&p.forward(xs)?.0, &rs),
                analytic,
                &grad_in,
            )
        }
        Target::Dain => {
            let mut p = DainParams::new(d);
            // Perturbations scale with 1/sqrt(D) so the scale divisor
            // Wb·b + eps stays well away from zero; near a zero crossing
            // the function is too curved for finite differences to probe.
            let scale = 0.1 / (d as f64).sqrt();
            for v in p.wa.data_mut().iter_mut().chain(p.wb.data_mut()) {
                *v += scale * rng.normal();
            }
            for v in p.wc.data_mut() {
                *v = scale * rng.normal();
            }
            for v in p.wd.iter_mut() {
                *v = rng.uniform(-1.0, 1.0);
            }
            let xs = random_batch(&mut rng, 3, d, t);
            let rs = probes(&mut rng, &xs);
            let (_, cache) = p.forward(&xs)?;
            let (grad_in, grads) = p.backward(&rs, &cache)?;
            let analytic = grads
                .slots()
                .into_iter()
                .map(|g| (g.name, g.values.to_vec()))
                .collect();
            drive(
                target,
                (d, t),
                seed,
                tol,
                &p,
                &xs,
                |p| p.slots_mut(),
                |p, xs| probe_loss(&p.forward(xs)?.0, &rs),
                analytic,
                &grad_in,
            )
        }
        Target::BatchNorm => {
            let mut p = BatchNormParams::new(d, t);
            p.gamma = Matrix::from_fn(d, t, |_, _| rng.uniform(0.5, 1.5));
            p.beta = Matrix::from_fn(d, t, |_, _| rng.uniform(-0.5, 0.5));
            let xs = random_batch(&mut rng, 3, d, t);
            let rs = probes(&mut rng, &xs);
            let (_, cache) = {
                let mut q = p.clone();
                q.forward(&xs, true)?
            };
            let (grad_in, grads) = p.backward(&rs, &cache)?;
            let analytic = grads
                .slots()
                .into_iter()
                .map(|g| (g.name, g.values.to_vec()))
                .collect();
            drive(
                target,
                (d, t),
                seed,
                tol,
                &p,
                &xs,
                |p| p.slots_mut(),
                |p, xs| {
                    let mut q = p.clone();
                    probe_loss(&q.forward(xs, true)?.0, &rs)
                },
                analytic,
                &grad_in,
            )
        }
        Target::Bilinear => {
            use crate::layers::bilinear::{Activation, BilinearLayer};
            // Reject instances with a pre-activation near the relu kink:
            // a ±h probe would flip its state and poison the difference
            // quotient. Deterministic, bounded retry.
            let (layer, xs, cache, out) = {
                let mut attempt = 0u64;
                loop {
                    let mut r = Rng::derive(seed, 0x626c00 + attempt);
                    let layer =
                        BilinearLayer::new(&mut r, d, t, d + 1, t.max(2) - 1, Activation::Relu);
                    let xs = random_batch(&mut r, 1, d, t);
                    let (out, cache) = layer.forward(&xs[0])?;
                    if cache.min_abs_pre() > 1e-3 || attempt >= 50 {
                        break (layer, xs, cache, out);
                    }
                    attempt += 1;
                }
            };
            let rs = probes(&mut rng, std::slice::from_ref(&out));
            let (grad_in, grads) = layer.backward(&rs[0], &cache)?;
            let analytic = grads
                .slots()
                .into_iter()
                .map(|g| (g.name, g.values.to_vec()))
                .collect();
            drive(
                target,
                (d, t),
                seed,
                tol,
                &layer,
                &xs,
                |l| l.slots_mut(),
                |l, xs| probe_loss(&[l.forward(&xs[0])?.0], &rs),
                analytic,
                std::slice::from_ref(&grad_in),
            )
        }
        Target::Tabl => {
            use crate::layers::tabl::TablLayer;
            let mut layer = TablLayer::new(&mut rng, d, t, d + 1, t.max(2) - 1);
            layer.lambda = rng.uniform(0.2, 0.8);
            let xs = random_batch(&mut rng, 1, d, t);
            let (out, cache) = layer.forward(&xs[0])?;
            let rs = probes(&mut rng, std::slice::from_ref(&out));
            let (grad_in, grads) = layer.backward(&rs[0], &cache)?;
            let analytic = grads
                .slots()
                .into_iter()
                .map(|g| (g.name, g.values.to_vec()))
                .collect();
            drive(
                target,
                (d, t),
                seed,
                tol,
                &layer,
                &xs,
                |l| l.slots_mut(),
                |l, xs| probe_loss(&[l.forward(&xs[0])?.0], &rs),
                analytic,
                std::slice::from_ref(&grad_in),
            )
        }
        Target::Network(arch, norm) => {
            let n = 3;
            // As with the bare bilinear layer, resample (deterministically)
            // when a relu pre-activation sits within probing distance of
            // its kink.
            let (net, xs, labels) = {
                let mut attempt = 0u64;
                loop {
                    let mut r = Rng::derive(seed, 0x6e657400 + attempt);
                    let mut net = build_network(arch, norm, &mut r);
                    net.dropout = 0.0;
                    let xs = random_batch(&mut r, n, INPUT_FEATURES, INPUT_STEPS);
                    let labels: Vec<usize> = (0..n).map(|_| r.below(CLASSES)).collect();
                    let margin = net.clone().min_relu_margin(&xs)?;
                    if margin > 1e-3 || attempt >= 50 {
                        break (net, xs, labels);
                    }
                    attempt += 1;
                }
            };
            let weights = ClassWeights([1.1, 0.8, 1.1]);

            let (grad_in, analytic) = {
                let mut fwd = net.clone();
                let mut dummy = Rng::new(0); // dropout is off
                let (probs, cache) = fwd.forward_train(&xs, &mut dummy)?;
                let (_, grad_logits) = weighted_cross_entropy(&probs, &labels, &weights)?;
                let (grad_in, grads) = fwd.backward(&grad_logits, &cache)?;
                let analytic: Vec<(String, Vec<f64>)> = grads
                    .slots()
                    .into_iter()
                    .map(|g| (g.name, g.values.to_vec()))
                    .collect();
                (grad_in, analytic)
            };

            let loss_of = move |net: &crate::layers::Network, xs: &[Matrix]| -> Result<f64> {
                let mut probe = net.clone();
                let mut dummy = Rng::new(0);
                let (probs, _) = probe.forward_train(xs, &mut dummy)?;
                Ok(weighted_cross_entropy(&probs, &labels, &weights)?.0)
            };

            drive(
                target,
                (INPUT_FEATURES, INPUT_STEPS),
                seed,
                tol,
                &net,
                &xs,
                |n| n.slots_mut(),
                loss_of,
                analytic,
                &grad_in,
            )
        }
    }
}
