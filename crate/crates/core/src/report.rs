//! Violation reports shared by every verifier.

use std::fmt;

use crate::novikov::MonoidElement;

/// One failed identity. `discrepancy` lists the nonzero components of the evaluated
/// difference as `(basis index, rendered coefficient)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub check: String,
    pub k: usize,
    pub beta: MonoidElement,
    pub tuple: Vec<usize>,
    pub discrepancy: Vec<(usize, String)>,
    pub note: Option<String>,
}

impl Violation {
    pub fn new(
        check: &str,
        k: usize,
        beta: MonoidElement,
        tuple: Vec<usize>,
        discrepancy: Vec<(usize, String)>,
    ) -> Self {
        Violation { check: check.to_string(), k, beta, tuple, discrepancy, note: None }
    }

    /// A violation without an operation locus.
    pub fn note(check: &str, msg: String) -> Self {
        Violation {
            check: check.to_string(),
            k: 0,
            beta: MonoidElement::zero(),
            tuple: Vec::new(),
            discrepancy: Vec::new(),
            note: Some(msg),
        }
    }

    /// A violation located at a pair of basis indices with a scalar discrepancy.
    pub fn pair(check: &str, i: usize, j: usize, value: String) -> Self {
        Violation {
            check: check.to_string(),
            k: 2,
            beta: MonoidElement::zero(),
            tuple: vec![i, j],
            discrepancy: vec![(0, value)],
            note: None,
        }
    }

    pub fn with_note(mut self, msg: impl Into<String>) -> Self {
        self.note = Some(msg.into());
        self
    }

    fn sort_key(&self) -> (&MonoidElement, usize, &Vec<usize>, &String) {
        (&self.beta, self.k, &self.tuple, &self.check)
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] k={} beta={} tuple={:?}", self.check, self.k, self.beta, self.tuple)?;
        if !self.discrepancy.is_empty() {
            let parts: Vec<String> =
                self.discrepancy.iter().map(|(i, c)| format!("{i}: {c}")).collect();
            write!(f, " discrepancy {{{}}}", parts.join(", "))?;
        }
        if let Some(n) = &self.note {
            write!(f, " ({n})")?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Report {
    pub violations: Vec<Violation>,
}

impl Report {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.violations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }

    pub fn extend(&mut self, other: Report) {
        self.violations.extend(other.violations);
    }

    /// Sorts by `(E(beta), mu(beta), k, tuple, check)`.
    pub fn sorted(mut self) -> Self {
        self.violations.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
        self
    }

    /// Distinct `(k, beta)` loci, sorted.
    pub fn loci(&self) -> Vec<(usize, MonoidElement)> {
        let mut l: Vec<_> = self.violations.iter().map(|v| (v.k, v.beta.clone())).collect();
        l.sort_by(|a, b| (&a.1, a.0).cmp(&(&b.1, b.0)));
        l.dedup();
        l
    }

    pub fn with_check(&self, check: &str) -> Vec<&Violation> {
        self.violations.iter().filter(|v| v.check == check).collect()
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return writeln!(f, "ok: no violations");
        }
        writeln!(f, "{} violation(s)", self.violations.len())?;
        for v in &self.violations {
            writeln!(f, "  {v}")?;
        }
        Ok(())
    }
}
