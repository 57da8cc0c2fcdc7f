//! Stationary analysis of finite Markov chains with rewards: balance
//! equations, average reward, and relative rewards from the Poisson equation
//! `η + g = r̄ + P g`.

use nalgebra::{DMatrix, DVector};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::pomdp::check_row;

/// Maximum Poisson residual accepted by [`analyze_chain`].
pub const POISSON_TOLERANCE: f64 = 1e-8;

fn check_stochastic(p: &DMatrix<f64>) -> Result<()> {
    if p.nrows() != p.ncols() || p.nrows() == 0 {
        return Err(Error::Validation(format!(
            "transition matrix must be square and nonempty, got {}x{}",
            p.nrows(),
            p.ncols()
        )));
    }
    for i in 0..p.nrows() {
        let row: Vec<f64> = p.row(i).iter().copied().collect();
        check_row(&row, || format!("P[{i}]"))?;
    }
    Ok(())
}

/// Closed communicating classes of the support graph, each sorted, ordered
/// by smallest member.
pub fn recurrent_classes(p: &DMatrix<f64>) -> Vec<Vec<usize>> {
    let n = p.nrows();
    let mut graph = DiGraph::<(), ()>::with_capacity(n, n * 4);
    let nodes: Vec<_> = (0..n).map(|_| graph.add_node(())).collect();
    for i in 0..n {
        for j in 0..n {
            if p[(i, j)] > 0.0 {
                graph.add_edge(nodes[i], nodes[j], ());
            }
        }
    }
    let mut component = vec![0usize; n];
    let sccs = tarjan_scc(&graph);
    for (c, scc) in sccs.iter().enumerate() {
        for node in scc {
            component[node.index()] = c;
        }
    }
    let mut classes: Vec<Vec<usize>> = sccs
        .iter()
        .enumerate()
        .filter(|(c, scc)| {
            scc.iter().all(|node| {
                let i = node.index();
                (0..n).all(|j| p[(i, j)] == 0.0 || component[j] == *c)
            })
        })
        .map(|(_, scc)| {
            let mut members: Vec<usize> = scc.iter().map(|n| n.index()).collect();
            members.sort_unstable();
            members
        })
        .collect();
    classes.sort_by_key(|c| c[0]);
    classes
}

fn summarize_classes(classes: &[Vec<usize>]) -> String {
    let shown: Vec<String> = classes.iter().map(|c| format!("{c:?}")).collect();
    format!("(closed classes: {})", shown.join(", "))
}

/// Solves `μP = μ, μe = 1` on an irreducible or unichain matrix.
fn solve_balance(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let mu = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("balance equations".into()))?;
    let mut out: Vec<f64> = mu.iter().map(|&v| if v.abs() < 1e-15 { 0.0 } else { v }).collect();
    if out.iter().any(|&v| v < -1e-10 || !v.is_finite()) {
        return Err(Error::Singular(
            "balance equations produced a negative probability".into(),
        ));
    }
    for v in &mut out {
        *v = v.max(0.0);
    }
    Ok(out)
}

/// Unique stationary distribution of a unichain transition matrix.
///
/// The balance system is solved directly with one redundant equation replaced
/// by the normalization constraint.
pub fn stationary_distribution(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_stochastic(p)?;
    let classes = recurrent_classes(p);
    if classes.len() != 1 {
        return Err(Error::Ergodicity {
            classes: classes.len(),
            detail: summarize_classes(&classes),
        });
    }
    solve_balance(p)
}

/// Cesàro-limit distribution `lim (1/T) Σ_t e_init P^t`, defined for any
/// finite chain, including chains with several recurrent classes.
pub fn limiting_distribution(p: &DMatrix<f64>, initial: usize) -> Result<Vec<f64>> {
    check_stochastic(p)?;
    let n = p.nrows();
    if initial >= n {
        return Err(Error::Index {
            what: "initial state",
            index: initial,
            size: n,
        });
    }
    let classes = recurrent_classes(p);
    if classes.len() == 1 {
        return solve_balance(p);
    }
    let mut class_of = vec![usize::MAX; n];
    for (c, members) in classes.iter().enumerate() {
        for &i in members {
            class_of[i] = c;
        }
    }
    // Absorption probabilities from `initial` into each closed class.
    let absorption: Vec<f64> = if class_of[initial] != usize::MAX {
        (0..classes.len())
            .map(|c| if c == class_of[initial] { 1.0 } else { 0.0 })
            .collect()
    } else {
        let transient: Vec<usize> = (0..n).filter(|&i| class_of[i] == usize::MAX).collect();
        let t = transient.len();
        let mut a = DMatrix::<f64>::identity(t, t);
        for (ri, &i) in transient.iter().enumerate() {
            for (rj, &j) in transient.iter().enumerate() {
                a[(ri, rj)] -= p[(i, j)];
            }
        }
        let mut b = DMatrix::<f64>::zeros(t, classes.len());
        for (ri, &i) in transient.iter().enumerate() {
            for j in 0..n {
                if class_of[j] != usize::MAX {
                    b[(ri, class_of[j])] += p[(i, j)];
                }
            }
        }
        let x = a
            .lu()
            .solve(&b)
            .ok_or_else(|| Error::Singular("absorption probabilities".into()))?;
        let row = transient.iter().position(|&i| i == initial).expect("initial is transient");
        (0..classes.len()).map(|c| x[(row, c)]).collect()
    };
    let mut mu = vec![0.0; n];
    for (c, members) in classes.iter().enumerate() {
        if absorption[c] <= 0.0 {
            continue;
        }
        let k = members.len();
        let sub = DMatrix::<f64>::from_fn(k, k, |a, b| p[(members[a], members[b])]);
        let local = solve_balance(&sub)?;
        for (a, &i) in members.iter().enumerate() {
            mu[i] += absorption[c] * local[a];
        }
    }
    Ok(mu)
}

/// `η = Σ_w μ(w) r̄(w)`.
pub fn average_reward(mu: &[f64], expected_reward: &[f64]) -> f64 {
    mu.iter().zip(expected_reward).map(|(m, r)| m * r).sum()
}

/// `g = [(I − P + eμ)^{-1} − eμ] r̄`.
pub fn relative_reward(p: &DMatrix<f64>, expected_reward: &[f64], mu: &[f64]) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut m = DMatrix::<f64>::identity(n, n) - p;
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] += mu[j];
        }
    }
    let r = DVector::from_column_slice(expected_reward);
    let y = m
        .lu()
        .solve(&r)
        .ok_or_else(|| Error::Ergodicity {
            classes: 0,
            detail: "(I - P + e mu) is singular".into(),
        })?;
    let eta = average_reward(mu, expected_reward);
    Ok(y.iter().map(|v| v - eta).collect())
}

/// `max_w |η + g(w) − r̄(w) − Σ P(w, w') g(w')|`.
pub fn poisson_residual(p: &DMatrix<f64>, expected_reward: &[f64], eta: f64, g: &[f64]) -> f64 {
    let n = p.nrows();
    (0..n)
        .map(|i| {
            let pg: f64 = (0..n).map(|j| p[(i, j)] * g[j]).sum();
            (eta + g[i] - expected_reward[i] - pg).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StationaryAnalysis {
    pub distribution: Vec<f64>,
    pub expected_reward: Vec<f64>,
    pub average_reward: f64,
    pub relative_reward: Vec<f64>,
    pub poisson_residual: f64,
}

/// Stationary distribution, average reward and relative rewards of a
/// unichain. Fails if the Poisson residual reaches [`POISSON_TOLERANCE`].
pub fn analyze_chain(p: &DMatrix<f64>, expected_reward: Vec<f64>) -> Result<StationaryAnalysis> {
    let distribution = stationary_distribution(p)?;
    let average_reward = average_reward(&distribution, &expected_reward);
    let relative_reward = relative_reward(p, &expected_reward, &distribution)?;
    let poisson_residual = poisson_residual(p, &expected_reward, average_reward, &relative_reward);
    if poisson_residual.is_nan() || poisson_residual >= POISSON_TOLERANCE {
        return Err(Error::Validation(format!(
            "Poisson residual {poisson_residual:e} exceeds {POISSON_TOLERANCE:e}"
        )));
    }
    Ok(StationaryAnalysis {
        distribution,
        expected_reward,
        average_reward,
        relative_reward,
        poisson_residual,
    })
}
