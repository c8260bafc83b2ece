//! Inter-annotator agreement via Cohen's kappa.
//!
//! kappa = (P_o - P_e) / (1 - P_e), where P_o is the observed agreement and
//! P_e the chance agreement. For paired label sequences, P_o is the
//! fraction of items both annotators labeled identically and P_e is the
//! sum over categories of the product of per-annotator marginals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Paired labels from two annotators, one vector per annotation layer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementInput {
    /// Layer name (e.g. `target`, `aspect`, `opinion`, `polarity`) to
    /// per-item (annotator A, annotator B) label pairs.
    pub layers: BTreeMap<String, Vec<(String, String)>>,
}

/// Observed agreement, chance agreement and kappa for one layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerAgreement {
    pub p_o: f64,
    pub p_e: f64,
    pub kappa: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum KappaError {
    #[error("observed agreement {0} outside [0, 1]")]
    BadObserved(f64),
    #[error("chance agreement {0} outside [0, 1)")]
    BadChance(f64),
    #[error("kappa undefined: chance agreement is 1")]
    Undefined,
    #[error("layer {0:?} has no items")]
    EmptyLayer(String),
}

/// kappa from precomputed agreement fractions.
pub fn cohen_kappa(p_o: f64, p_e: f64) -> Result<f64, KappaError> {
    if !(0.0..=1.0).contains(&p_o) || !p_o.is_finite() {
        return Err(KappaError::BadObserved(p_o));
    }
    if p_e == 1.0 {
        return Err(KappaError::Undefined);
    }
    if !(0.0..1.0).contains(&p_e) || !p_e.is_finite() {
        return Err(KappaError::BadChance(p_e));
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Computes (P_o, P_e, kappa) from paired labels.
pub fn kappa_from_pairs(pairs: &[(String, String)]) -> Result<LayerAgreement, KappaError> {
    if pairs.is_empty() {
        return Err(KappaError::EmptyLayer(String::new()));
    }
    let n = pairs.len() as f64;
    let agreements = pairs.iter().filter(|(a, b)| a == b).count() as f64;
    let p_o = agreements / n;

    let mut marg_a: BTreeMap<&str, f64> = BTreeMap::new();
    let mut marg_b: BTreeMap<&str, f64> = BTreeMap::new();
    for (a, b) in pairs {
        *marg_a.entry(a.as_str()).or_insert(0.0) += 1.0;
        *marg_b.entry(b.as_str()).or_insert(0.0) += 1.0;
    }
    let mut p_e = 0.0;
    for (cat, count_a) in &marg_a {
        if let Some(count_b) = marg_b.get(cat) {
            p_e += (count_a / n) * (count_b / n);
        }
    }

    let kappa = if p_e == 1.0 {
        // Both annotators constant on the same label: perfect but
        // chance-saturated agreement.
        return Err(KappaError::Undefined);
    } else {
        (p_o - p_e) / (1.0 - p_e)
    };
    Ok(LayerAgreement { p_o, p_e, kappa })
}

/// Per-layer agreement over an [`AgreementInput`].
pub fn cohen_kappa_from_labels(
    input: &AgreementInput,
) -> Result<BTreeMap<String, LayerAgreement>, KappaError> {
    let mut out = BTreeMap::new();
    for (layer, pairs) in &input.layers {
        let agreement =
            kappa_from_pairs(pairs).map_err(|_| KappaError::EmptyLayer(layer.clone()))?;
        out.insert(layer.clone(), agreement);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(a: &[&str], b: &[&str]) -> Vec<(String, String)> {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x.to_string(), y.to_string()))
            .collect()
    }

    #[test]
    fn direct_substitution() {
        assert_eq!(cohen_kappa(0.9, 0.5).unwrap(), 0.8);
    }

    #[test]
    fn zero_numerator_gives_zero_kappa() {
        assert_eq!(cohen_kappa(0.3, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn chance_agreement_of_one_is_undefined() {
        assert_eq!(cohen_kappa(1.0, 1.0), Err(KappaError::Undefined));
    }

    #[test]
    fn out_of_range_inputs_are_rejected() {
        assert!(matches!(cohen_kappa(1.2, 0.5), Err(KappaError::BadObserved(_))));
        assert!(matches!(cohen_kappa(0.5, -0.1), Err(KappaError::BadChance(_))));
    }

    #[test]
    fn label_form_hand_counted_example() {
        let agreement = kappa_from_pairs(&pairs(&["x", "x", "y", "y"], &["x", "y", "y", "y"])).unwrap();
        assert_eq!(agreement.p_o, 0.75);
        assert_eq!(agreement.p_e, 0.5);
        assert_eq!(agreement.kappa, 0.5);
    }

    #[test]
    fn perfect_agreement_gives_kappa_one() {
        let agreement = kappa_from_pairs(&pairs(&["x", "y", "z"], &["x", "y", "z"])).unwrap();
        assert_eq!(agreement.p_o, 1.0);
        assert_eq!(agreement.kappa, 1.0);
    }

    #[test]
    fn kappa_sign_follows_po_minus_pe() {
        // Systematic disagreement: P_o below chance.
        let agreement = kappa_from_pairs(&pairs(&["x", "x", "y", "y"], &["y", "y", "x", "x"])).unwrap();
        assert!(agreement.p_o < agreement.p_e || agreement.p_o == 0.0);
        assert!(agreement.kappa < 0.0);
    }

    #[test]
    fn per_layer_agreement() {
        let mut input = AgreementInput::default();
        input.layers.insert(
            "target".to_string(),
            pairs(&["x", "x", "y", "y"], &["x", "y", "y", "y"]),
        );
        input
            .layers
            .insert("polarity".to_string(), pairs(&["pos", "neg"], &["pos", "neg"]));
        let report = cohen_kappa_from_labels(&input).unwrap();
        assert_eq!(report["target"].kappa, 0.5);
        assert_eq!(report["polarity"].kappa, 1.0);
    }

    #[test]
    fn empty_layer_is_an_error() {
        let mut input = AgreementInput::default();
        input.layers.insert("target".to_string(), vec![]);
        assert!(matches!(
            cohen_kappa_from_labels(&input),
            Err(KappaError::EmptyLayer(_))
        ));
    }
}
