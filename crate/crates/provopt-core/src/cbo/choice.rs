use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::CboError;

/// Source of decisions at the choice points of a plan generator.
pub trait ChoiceHook {
    /// Pick one of `num_choices` options (numbered from 0).
    fn make_choice(&mut self, num_choices: usize) -> Result<usize, CboError>;
}

/// Always takes the first option; used when no optimizer is attached.
#[derive(Debug, Default, Clone, Copy)]
pub struct FirstChoice;

impl ChoiceHook for FirstChoice {
    fn make_choice(&mut self, num_choices: usize) -> Result<usize, CboError> {
        if num_choices == 0 {
            return Err(CboError::NoOptions);
        }
        Ok(0)
    }
}

/// What to pick once the prescribed prefix is used up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fill {
    #[default]
    First,
    Last,
}

/// Decision log of one plan-generation pass: the prescribed choices for the
/// next pass, the choices taken and the number of options seen at each
/// choice point. Its size is bounded by the depth of the choice tree.
#[derive(Debug, Clone, Default)]
pub struct ChoiceLog {
    next: VecDeque<usize>,
    taken: Vec<usize>,
    options: Vec<usize>,
    fill: Fill,
    /// Clamp out-of-range prescriptions instead of failing, and drop any
    /// prescription left over at the end of the pass.
    lenient: bool,
    peak: usize,
}

impl ChoiceLog {
    pub fn new() -> Self {
        ChoiceLog::default()
    }

    /// Start a pass following `prefix`, then `fill`.
    pub fn prescribe(&mut self, prefix: &[usize], fill: Fill) {
        self.next = prefix.iter().copied().collect();
        self.taken.clear();
        self.options.clear();
        self.fill = fill;
        self.note_size();
    }

    /// Append one choice to the current prescription.
    pub fn push_prescription(&mut self, choice: usize) {
        self.next.push_back(choice);
        self.note_size();
    }

    pub fn set_lenient(&mut self, lenient: bool) {
        self.lenient = lenient;
    }

    pub fn taken(&self) -> &[usize] {
        &self.taken
    }

    pub fn options(&self) -> &[usize] {
        &self.options
    }

    pub fn pending(&self) -> usize {
        self.next.len()
    }

    /// Longest any of the three lists (prescribed, taken, option counts)
    /// has been.
    pub fn peak_size(&self) -> usize {
        self.peak
    }

    fn note_size(&mut self) {
        let size = self.next.len().max(self.taken.len()).max(self.options.len());
        self.peak = self.peak.max(size);
    }

    /// Close the pass, failing if a prescription was not consumed.
    pub fn finish_pass(&mut self) -> Result<(), CboError> {
        if !self.next.is_empty() {
            if self.lenient {
                self.next.clear();
            } else {
                return Err(CboError::Diverged {
                    pending: self.next.len(),
                });
            }
        }
        Ok(())
    }

    /// Prepare the next pass of a depth-first enumeration. Returns `false`
    /// when every path has been visited.
    pub fn advance(&mut self) -> bool {
        let mut path = core::mem::take(&mut self.taken);
        let mut opts = core::mem::take(&mut self.options);
        self.next.clear();
        while let (Some(c), Some(n)) = (path.pop(), opts.pop()) {
            if c + 1 < n {
                path.push(c + 1);
                self.next = path.into_iter().collect();
                self.fill = Fill::First;
                self.note_size();
                return true;
            }
        }
        false
    }
}

impl ChoiceHook for ChoiceLog {
    fn make_choice(&mut self, num_choices: usize) -> Result<usize, CboError> {
        if num_choices == 0 {
            return Err(CboError::NoOptions);
        }
        let choice = match self.next.pop_front() {
            Some(c) if c < num_choices => c,
            Some(_) if self.lenient => {
                // The plan shape changed under a mutation: abandon the rest
                // of the prescription.
                self.next.clear();
                0
            }
            Some(c) => {
                return Err(CboError::Inconsistent {
                    choice: c,
                    num_choices,
                })
            }
            None => match self.fill {
                Fill::First => 0,
                Fill::Last => num_choices - 1,
            },
        };
        self.taken.push(choice);
        self.options.push(num_choices);
        self.note_size();
        Ok(choice)
    }
}
