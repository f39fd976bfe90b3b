//! Generators and independent reference computations shared by the
//! integration tests.
#![allow(dead_code)]

use lml_core::{build_matrix, BidirectedGraph, MatrixKind, Subset, SubsetVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly positive weights normalized to sum to one.
pub fn random_distribution(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..len).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

pub fn random_table(rng: &mut impl Rng, p: usize) -> SubsetVector {
    SubsetVector::new(p, random_distribution(rng, 1 << p)).unwrap()
}

/// `r` pairwise disjoint nonempty blocks drawn from `{1..p}`.
pub fn random_blocks(rng: &mut impl Rng, p: usize, r: usize) -> Vec<Subset> {
    assert!(r <= p);
    let mut vars: Vec<usize> = (1..=p).collect();
    vars.shuffle(rng);
    let used = rng.random_range(r..=p);
    let mut blocks = vec![Subset::EMPTY; r];
    for (i, &v) in vars[..used].iter().enumerate() {
        let b = if i < r { i } else { rng.random_range(0..r) };
        blocks[b] = blocks[b].union(Subset::singleton(v));
    }
    blocks
}

/// `π(x) = Π_i q_i(x_{A_i}) · c(x_R | x_U)` with `U` the union of the blocks
/// and `R` the remaining variables: the blocks are mutually independent by
/// construction while `R` depends on everything.
pub fn product_table(rng: &mut impl Rng, p: usize, blocks: &[Subset]) -> SubsetVector {
    let union = blocks.iter().fold(Subset::EMPTY, |a, &b| a.union(b));
    let rest = Subset::full(p).difference(union);
    let margins: Vec<Vec<f64>> = blocks
        .iter()
        .map(|b| random_distribution(rng, 1 << b.len()))
        .collect();
    let conditionals: Vec<Vec<f64>> = (0..1usize << union.len())
        .map(|_| random_distribution(rng, 1 << rest.len()))
        .collect();
    SubsetVector::from_fn(p, |x| {
        let joint: f64 = blocks
            .iter()
            .zip(&margins)
            .map(|(&b, q)| q[x.intersection(b).compress(b)])
            .product();
        joint
            * conditionals[x.intersection(union).compress(union)]
                [x.intersection(rest).compress(rest)]
    })
    .unwrap()
}

/// Distribution generated by one independent binary latent cause per edge;
/// each observed variable depends only on the causes of its incident edges.
/// Variables sharing no latent cause are marginally independent, so the
/// result lies in the bidirected graph model of `g`.
pub fn latent_graph_table(rng: &mut impl Rng, g: &BidirectedGraph) -> SubsetVector {
    let p = g.p();
    let edges = g.edges();
    let theta: Vec<f64> = edges.iter().map(|_| rng.random_range(0.2..0.8)).collect();
    let incident: Vec<Vec<usize>> = (1..=p)
        .map(|v| {
            (0..edges.len())
                .filter(|&e| edges[e].0 == v || edges[e].1 == v)
                .collect()
        })
        .collect();
    let response: Vec<Vec<f64>> = incident
        .iter()
        .map(|inc| {
            (0..1usize << inc.len())
                .map(|_| rng.random_range(0.1..0.9))
                .collect()
        })
        .collect();
    let mut pi = vec![0.0; 1 << p];
    for u in 0..1usize << edges.len() {
        let weight: f64 = theta
            .iter()
            .enumerate()
            .map(|(e, t)| if u >> e & 1 == 1 { *t } else { 1.0 - t })
            .product();
        for (x, cell) in pi.iter_mut().enumerate() {
            let mut pr = weight;
            for v in 0..p {
                let local = incident[v]
                    .iter()
                    .enumerate()
                    .fold(0, |acc, (i, &e)| acc | ((u >> e & 1) << i));
                let one = response[v][local];
                pr *= if x >> v & 1 == 1 { one } else { 1.0 - one };
            }
            *cell += pr;
        }
    }
    SubsetVector::new(p, pi).unwrap()
}

/// Multinomial sample by sequential binomial draws.
pub fn multinomial(rng: &mut impl Rng, pi: &[f64], n: u64) -> Vec<f64> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(pi.len());
    for (i, &q) in pi.iter().enumerate() {
        let draw = if i + 1 == pi.len() || left == 0 {
            left
        } else {
            let prob = (q / mass).clamp(0.0, 1.0);
            Binomial::new(left, prob).unwrap().sample(rng)
        };
        out.push(draw as f64);
        left -= draw;
        mass -= q;
    }
    out
}

/// Cell probabilities from a log-mean linear vector by dense matrices.
fn probabilities_from_gamma(gamma: &SubsetVector) -> (SubsetVector, SubsetVector) {
    let p = gamma.p();
    let z = build_matrix(MatrixKind::Zeta, p).unwrap();
    let m = build_matrix(MatrixKind::Moebius, p).unwrap();
    let mu = z.transpose().mul_vec(gamma).map(f64::exp);
    (m.mul_vec(&mu), mu)
}

fn multinomial_loglik(n: &SubsetVector, pi: &SubsetVector) -> f64 {
    n.values()
        .iter()
        .zip(pi.values())
        .map(|(&c, &q)| if c > 0.0 { c * q.ln() } else { 0.0 })
        .sum()
}

/// Maximizes the multinomial likelihood over `{γ : γ_D = 0 for D in
/// constrained}` by projected gradient ascent in the `γ` coordinates with
/// Barzilai-Borwein steps and Armijo backtracking. Returns the deviance.
///
/// Everything is computed with the dense reference matrices, so nothing is
/// shared with the Fisher scoring code.
pub fn projected_gradient_deviance(n: &SubsetVector, constrained: &[Subset]) -> f64 {
    let p = n.p();
    let z = build_matrix(MatrixKind::Zeta, p).unwrap();
    let mt = build_matrix(MatrixKind::Moebius, p).unwrap().transpose();
    let total = n.sum();
    let free: Vec<bool> = (0..1usize << p)
        .map(|d| d != 0 && !constrained.contains(&Subset(d)))
        .collect();

    let objective = |gamma: &SubsetVector| -> Option<(f64, SubsetVector)> {
        let (pi, mu) = probabilities_from_gamma(gamma);
        if pi.values().iter().any(|&q| q <= 0.0 || q.is_nan()) {
            return None;
        }
        let w = SubsetVector::from_fn(p, |c| n[c] / pi[c]).unwrap();
        let inner = mt.mul_vec(&w);
        let scaled = SubsetVector::from_fn(p, |e| mu[e] * inner[e]).unwrap();
        let mut grad = z.mul_vec(&scaled);
        for (d, &is_free) in free.iter().enumerate() {
            if !is_free {
                grad[Subset(d)] = 0.0;
            }
        }
        Some((multinomial_loglik(n, &pi), grad))
    };

    // Start from mutual independence, which lies in every model.
    let mut gamma = SubsetVector::zeros(p).unwrap();
    for v in 1..=p {
        let sv = Subset::singleton(v);
        let ones: f64 = n
            .iter()
            .filter(|(d, _)| d.contains(v))
            .map(|(_, c)| c)
            .sum();
        gamma[sv] = ((ones + 0.5) / (total + 1.0)).ln();
    }
    let (mut value, mut grad) = objective(&gamma).expect("independence start is admissible");
    let mut step = 1.0 / total;
    for _ in 0..200_000 {
        if grad.values().iter().all(|g| g.abs() < 1e-9) {
            break;
        }
        let gnorm2: f64 = grad.values().iter().map(|g| g * g).sum();
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = SubsetVector::from_fn(p, |d| gamma[d] + t * grad[d]).unwrap();
            if let Some((v, g)) = objective(&trial) {
                if v >= value + 1e-4 * t * gnorm2 {
                    accepted = Some((trial, v, g));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, v, g)) = accepted else { break };
        let s: Vec<f64> = next
            .values()
            .iter()
            .zip(gamma.values())
            .map(|(a, b)| a - b)
            .collect();
        let y: Vec<f64> = g
            .values()
            .iter()
            .zip(grad.values())
            .map(|(a, b)| a - b)
            .collect();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        let ss: f64 = s.iter().map(|a| a * a).sum();
        step = if sy < 0.0 { ss / -sy } else { 2.0 * t };
        gamma = next;
        value = v;
        grad = g;
    }
    let saturated: f64 = n
        .values()
        .iter()
        .map(|&c| if c > 0.0 { c * (c / total).ln() } else { 0.0 })
        .sum();
    2.0 * (saturated - value)
}

/// Flips the 0/1 coding of every variable in `flip`.
pub fn recode(n: &SubsetVector, flip: Subset) -> SubsetVector {
    SubsetVector::from_fn(n.p(), |d| n[Subset(d.mask() ^ flip.mask())]).unwrap()
}
