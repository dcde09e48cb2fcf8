//! Collapsed Gibbs sampler over one latent true category per vote.

use std::collections::{BTreeMap, HashMap};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::priors::{ClassPrior, ConfusionMatrix, LabelerPrior};
use super::votes::{VoteSet, NUM_RESPONSES, UNSURE};
use crate::error::{Error, Result};
use crate::labels::{LabelVector, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GibbsConfig {
    pub burn_in: usize,
    pub sampling_epochs: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            burn_in: 200,
            sampling_epochs: 800,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub epochs: usize,
    pub burn_in: usize,
    pub sampling_epochs: usize,
    pub seed: u64,
    pub n_votes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrowdResult {
    pub components: Vec<String>,
    pub labels: Vec<LabelVector>,
    pub labelers: Vec<String>,
    /// Row-normalized posterior confusion estimates, averaged over the
    /// sampling epochs.
    pub labeler_confusions: Vec<ConfusionMatrix>,
    /// Weighted (category, response) counts of the last epoch.
    pub labeler_counts: Vec<ConfusionMatrix>,
    pub diagnostics: Diagnostics,
}

impl CrowdResult {
    pub fn label(&self, component: &str) -> Option<&LabelVector> {
        self.components.iter().position(|c| c == component).map(|i| &self.labels[i])
    }

    pub fn confusion(&self, labeler: &str) -> Option<&ConfusionMatrix> {
        self.labelers.iter().position(|l| l == labeler).map(|i| &self.labeler_confusions[i])
    }
}

struct Indexed {
    component: usize,
    labeler: usize,
    response: usize,
    weight: f64,
}

fn draw(weights: &[f64; NUM_CLASSES], rng: &mut impl Rng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.gen::<f64>() * total;
    for (k, &w) in weights.iter().enumerate() {
        if u < w {
            return k;
        }
        u -= w;
    }
    // rounding left u just above the last bucket
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(NUM_CLASSES - 1)
}

fn normalize_into(acc: &mut [f64], values: impl Iterator<Item = f64>, scratch: &mut Vec<f64>) {
    scratch.clear();
    scratch.extend(values);
    let s: f64 = scratch.iter().sum();
    for (a, v) in acc.iter_mut().zip(scratch.iter()) {
        *a += v / s;
    }
}

/// Fits labels and labeler confusions. Every labeler in `votes` must have a
/// prior in `priors`.
pub fn cllda_fit(
    votes: &VoteSet,
    priors: &BTreeMap<String, LabelerPrior>,
    class_prior: &ClassPrior,
    config: &GibbsConfig,
) -> Result<CrowdResult> {
    if votes.is_empty() {
        return Err(Error::EmptyInput("no votes to aggregate".into()));
    }
    if config.sampling_epochs == 0 {
        return Err(Error::InvalidConfig("sampling_epochs must be positive".into()));
    }
    let labelers = votes.labelers();
    let mut b = Vec::with_capacity(labelers.len());
    for l in &labelers {
        let p = priors.get(l).ok_or_else(|| Error::MissingPrior(l.clone()))?;
        b.push(*p.matrix());
    }
    let b_rows: Vec<[f64; NUM_CLASSES]> = b
        .iter()
        .map(|m| std::array::from_fn(|k| m[k].iter().sum()))
        .collect();
    let alpha = *class_prior.alpha();

    let component_index: HashMap<&str, usize> = votes
        .components
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let labeler_index: HashMap<&str, usize> = labelers.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut items = Vec::with_capacity(votes.votes.len());
    for v in &votes.votes {
        let component = *component_index
            .get(v.component_id.as_str())
            .ok_or_else(|| Error::InvalidConfig(format!("component {} is not in the roster", v.component_id)))?;
        if !(v.weight > 0.0 && v.weight <= 1.0) {
            return Err(Error::MalformedSubmission(format!("vote weight {} outside (0, 1]", v.weight)));
        }
        items.push(Indexed {
            component,
            labeler: labeler_index[v.labeler_id.as_str()],
            response: v.response.index(),
            weight: v.weight,
        });
    }

    let n_comp = votes.components.len();
    let n_lab = labelers.len();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut z: Vec<usize> = items
        .iter()
        .map(|v| if v.response == UNSURE { rng.gen_range(0..NUM_CLASSES) } else { v.response })
        .collect();

    let mut n = vec![[0.0; NUM_CLASSES]; n_comp];
    let mut m = vec![[[0.0; NUM_RESPONSES]; NUM_CLASSES]; n_lab];
    let mut m_rows = vec![[0.0; NUM_CLASSES]; n_lab];
    let mut label_acc = vec![[0.0; NUM_CLASSES]; n_comp];
    let mut conf_acc = vec![[[0.0; NUM_RESPONSES]; NUM_CLASSES]; n_lab];
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut scratch = Vec::with_capacity(NUM_RESPONSES);
    let epochs = config.burn_in + config.sampling_epochs;

    for epoch in 0..epochs {
        // rebuilt from z each epoch so that removing and re-adding fractional
        // weights cannot accumulate rounding drift
        n.iter_mut().for_each(|r| *r = [0.0; NUM_CLASSES]);
        m.iter_mut().for_each(|r| *r = [[0.0; NUM_RESPONSES]; NUM_CLASSES]);
        m_rows.iter_mut().for_each(|r| *r = [0.0; NUM_CLASSES]);
        for (v, &k) in items.iter().zip(&z) {
            n[v.component][k] += v.weight;
            m[v.labeler][k][v.response] += v.weight;
            m_rows[v.labeler][k] += v.weight;
        }

        order.shuffle(&mut rng);
        for &vi in &order {
            let v = &items[vi];
            let (i, l, r, w) = (v.component, v.labeler, v.response, v.weight);
            let old = z[vi];
            n[i][old] = (n[i][old] - w).max(0.0);
            m[l][old][r] = (m[l][old][r] - w).max(0.0);
            m_rows[l][old] = (m_rows[l][old] - w).max(0.0);
            let p: [f64; NUM_CLASSES] = std::array::from_fn(|k| {
                (alpha[k] + n[i][k]) * (b[l][k][r] + m[l][k][r]) / (b_rows[l][k] + m_rows[l][k])
            });
            let k = draw(&p, &mut rng);
            z[vi] = k;
            n[i][k] += w;
            m[l][k][r] += w;
            m_rows[l][k] += w;
        }

        if epoch >= config.burn_in {
            for (acc, counts) in label_acc.iter_mut().zip(&n) {
                normalize_into(acc, (0..NUM_CLASSES).map(|k| alpha[k] + counts[k]), &mut scratch);
            }
            for l in 0..n_lab {
                for k in 0..NUM_CLASSES {
                    normalize_into(
                        &mut conf_acc[l][k],
                        (0..NUM_RESPONSES).map(|r| b[l][k][r] + m[l][k][r]),
                        &mut scratch,
                    );
                }
            }
        }
    }

    let s = config.sampling_epochs as f64;
    let labels = label_acc
        .into_iter()
        .map(|acc| LabelVector::normalized(acc.map(|v| v / s)))
        .collect::<Result<Vec<_>>>()?;
    let labeler_confusions = conf_acc
        .into_iter()
        .map(|mat| {
            mat.map(|row| {
                let t: f64 = row.iter().sum();
                row.map(|v| v / t)
            })
        })
        .collect();
    Ok(CrowdResult {
        components: votes.components.clone(),
        labels,
        labelers,
        labeler_confusions,
        labeler_counts: m,
        diagnostics: Diagnostics {
            epochs,
            burn_in: config.burn_in,
            sampling_epochs: config.sampling_epochs,
            seed: config.seed,
            n_votes: items.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crowdlabel::priors::{default_priors, PriorMode};
    use crate::crowdlabel::votes::{Response, Vote};
    use crate::labels::Category;
    use std::collections::BTreeSet;

    fn rising(a: f64, n: usize) -> f64 {
        (0..n).map(|j| a + j as f64).product()
    }

    /// Exact posterior mean of the normalized `alpha + n` for one component,
    /// by enumerating all assignments of unit-weight votes `(labeler, response)`.
    fn enumerate_posterior(votes: &[(usize, usize)], priors: &[ConfusionMatrix], alpha: &[f64; 7]) -> [f64; 7] {
        let nv = votes.len();
        let sum_alpha: f64 = alpha.iter().sum();
        let mut mean = [0.0; 7];
        let mut total = 0.0;
        for code in 0..7usize.pow(nv as u32) {
            let z: Vec<usize> = (0..nv).map(|j| (code / 7usize.pow(j as u32)) % 7).collect();
            let mut n = [0usize; 7];
            let mut m = vec![[[0usize; 8]; 7]; priors.len()];
            for (&(l, r), &k) in votes.iter().zip(&z) {
                n[k] += 1;
                m[l][k][r] += 1;
            }
            let mut p: f64 = (0..7).map(|k| rising(alpha[k], n[k])).product();
            for (l, counts) in m.iter().enumerate() {
                for k in 0..7 {
                    let row: usize = counts[k].iter().sum();
                    let b_row: f64 = priors[l][k].iter().sum();
                    for r in 0..8 {
                        p *= rising(priors[l][k][r], counts[k][r]);
                    }
                    p /= rising(b_row, row);
                }
            }
            total += p;
            for k in 0..7 {
                mean[k] += p * (alpha[k] + n[k] as f64) / (sum_alpha + nv as f64);
            }
        }
        mean.map(|v| v / total)
    }

    fn fixture(responses: &[Response]) -> VoteSet {
        let votes = responses
            .iter()
            .enumerate()
            .map(|(i, &r)| Vote::new(format!("l{i}"), "ic", r, 1.0).unwrap())
            .collect();
        VoteSet::from_votes(votes, BTreeSet::new())
    }

    fn unknown_priors(set: &VoteSet) -> BTreeMap<String, LabelerPrior> {
        set.labelers()
            .into_iter()
            .map(|l| (l, default_priors(PriorMode::TrainingUnknown)))
            .collect()
    }

    fn check_against_oracle(responses: &[Response], alpha: [f64; 7]) {
        let set = fixture(responses);
        let priors = unknown_priors(&set);
        let class_prior = ClassPrior::new(alpha).unwrap();
        let fit = cllda_fit(&set, &priors, &class_prior, &GibbsConfig::default()).unwrap();
        let exact = enumerate_posterior(
            &responses.iter().enumerate().map(|(i, r)| (i, r.index())).collect::<Vec<_>>(),
            &vec![*default_priors(PriorMode::TrainingUnknown).matrix(); responses.len()],
            &alpha,
        );
        for (a, b) in fit.labels[0].as_array().iter().zip(&exact) {
            assert!((a - b).abs() < 0.02, "{responses:?}: {:?} vs {exact:?}", fit.labels[0]);
        }
    }

    const BRAIN: Response = Response::Category(Category::Brain);
    const MUSCLE: Response = Response::Category(Category::Muscle);
    const EYE: Response = Response::Category(Category::Eye);

    #[test]
    fn unanimous_brain_matches_enumeration() {
        check_against_oracle(&[BRAIN, BRAIN, BRAIN], *ClassPrior::training().alpha());
        let fit = cllda_fit(
            &fixture(&[BRAIN, BRAIN, BRAIN]),
            &unknown_priors(&fixture(&[BRAIN, BRAIN, BRAIN])),
            &ClassPrior::training(),
            &GibbsConfig::default(),
        )
        .unwrap();
        assert_eq!(fit.labels[0].argmax(), Category::Brain);
    }

    #[test]
    fn conflicting_votes_match_enumeration() {
        check_against_oracle(&[BRAIN, MUSCLE], [1.0; 7]);
        check_against_oracle(&[BRAIN, MUSCLE, Response::Unsure], [1.0; 7]);
        check_against_oracle(&[EYE, Response::Unsure], [1.0; 7]);
        check_against_oracle(&[MUSCLE], *ClassPrior::test().alpha());
    }

    #[test]
    fn monotone_evidence() {
        let alpha = [1.0; 7];
        let prior = *default_priors(PriorMode::TrainingUnknown).matrix();
        let mut previous = 0.0;
        for k in 0..=3 {
            let votes: Vec<(usize, usize)> = (0..k).map(|i| (i, 2)).collect();
            let exact = enumerate_posterior(&votes, &vec![prior; k.max(1)], &alpha);
            assert!(exact[2] >= previous);
            previous = exact[2];
        }
    }

    #[test]
    fn unvoted_component_gets_class_prior() {
        let set = fixture(&[BRAIN]).with_components(["quiet".to_string()]);
        let cp = ClassPrior::training();
        let fit = cllda_fit(&set, &unknown_priors(&set), &cp, &GibbsConfig::default()).unwrap();
        let total: f64 = cp.alpha().iter().sum();
        for (a, b) in fit.label("quiet").unwrap().as_array().iter().zip(cp.alpha()) {
            assert!((a - b / total).abs() < 1e-12);
        }
    }

    #[test]
    fn seed_determinism() {
        let set = fixture(&[BRAIN, MUSCLE, Response::Unsure]);
        let priors = unknown_priors(&set);
        let cfg = GibbsConfig {
            seed: 11,
            ..GibbsConfig::default()
        };
        let a = cllda_fit(&set, &priors, &ClassPrior::new([1.0; 7]).unwrap(), &cfg).unwrap();
        let b = cllda_fit(&set, &priors, &ClassPrior::new([1.0; 7]).unwrap(), &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unsure_mass_is_conserved() {
        let votes = vec![
            Vote::new("a", "x", Response::Unsure, 1.0).unwrap(),
            Vote::new("a", "y", Response::Unsure, 0.5).unwrap(),
            Vote::new("a", "y", BRAIN, 0.5).unwrap(),
            Vote::new("b", "x", EYE, 1.0).unwrap(),
            Vote::new("b", "z", Response::Unsure, 1.0 / 3.0).unwrap(),
        ];
        let set = VoteSet::from_votes(votes, BTreeSet::new());
        let fit = cllda_fit(&set, &unknown_priors(&set), &ClassPrior::training(), &GibbsConfig::default()).unwrap();
        let unsure: f64 = fit.labeler_counts.iter().flatten().map(|row| row[UNSURE]).sum();
        assert!((unsure - (1.0 + 0.5 + 1.0 / 3.0)).abs() < 1e-12);
        for c in &fit.labeler_confusions {
            for row in c {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn missing_prior_is_an_error() {
        let set = fixture(&[BRAIN]);
        assert!(matches!(
            cllda_fit(&set, &BTreeMap::new(), &ClassPrior::training(), &GibbsConfig::default()),
            Err(Error::MissingPrior(_))
        ));
    }

    #[test]
    fn empty_votes_is_an_error() {
        assert!(matches!(
            cllda_fit(&VoteSet::default(), &BTreeMap::new(), &ClassPrior::training(), &GibbsConfig::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    /// Votes drawn from labelers who answer correctly with probability 0.8
    /// and otherwise pick uniformly among the remaining 7 responses.
    fn planted(seed: u64, perm: &[usize; 7]) -> (VoteSet, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<usize> = (0..60).map(|_| rng.gen_range(0..7)).collect();
        let mut votes = Vec::new();
        for l in 0..5 {
            for (i, &t) in truth.iter().enumerate() {
                let r = if rng.gen::<f64>() < 0.8 {
                    t
                } else {
                    let other = rng.gen_range(0..7);
                    if other >= t { other + 1 } else { other }
                };
                let r = if r < 7 { perm[r] } else { r };
                votes.push(Vote::new(format!("l{l}"), format!("c{i}"), Response::from_index(r).unwrap(), 1.0).unwrap());
            }
        }
        (VoteSet::from_votes(votes, BTreeSet::new()), truth.iter().map(|&t| perm[t]).collect())
    }

    #[test]
    fn planted_truth_is_recovered() {
        let identity = [0, 1, 2, 3, 4, 5, 6];
        let (set, truth) = planted(1, &identity);
        let fit = cllda_fit(&set, &unknown_priors(&set), &ClassPrior::training(), &GibbsConfig::default()).unwrap();
        let hits = fit.labels.iter().zip(&truth).filter(|(l, &t)| l.argmax().index() == t).count();
        assert!(hits as f64 / 60.0 >= 0.9, "{hits}/60");
    }

    #[test]
    fn category_relabeling_permutes_results() {
        let identity = [0, 1, 2, 3, 4, 5, 6];
        let perm = [3, 0, 6, 1, 5, 2, 4];
        let alpha = [1.0; 7];
        let (a_set, _) = planted(2, &identity);
        let (b_set, _) = planted(2, &perm);
        let cp = ClassPrior::new(alpha).unwrap();
        let a = cllda_fit(&a_set, &unknown_priors(&a_set), &cp, &GibbsConfig::default()).unwrap();
        let b = cllda_fit(&b_set, &unknown_priors(&b_set), &cp, &GibbsConfig::default()).unwrap();
        for (la, lb) in a.labels.iter().zip(&b.labels) {
            for k in 0..7 {
                assert!((la.as_array()[k] - lb.as_array()[perm[k]]).abs() < 0.05);
            }
        }
    }
}
