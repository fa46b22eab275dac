use crate::sampling::EvaluatedSolution;

/// Every truly evaluated solution, in evaluation order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Archive {
    solutions: Vec<EvaluatedSolution>,
    best: Option<usize>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a solution and returns a reference to it. The best index moves
    /// only on strict improvement, so ties keep the earliest solution.
    pub fn push(&mut self, x: Vec<f64>, value: f64) -> &EvaluatedSolution {
        let index = self.solutions.len();
        let improves = match self.best {
            None => true,
            Some(b) => value < self.solutions[b].value,
        };
        if improves {
            self.best = Some(index);
        }
        self.solutions.push(EvaluatedSolution { x, value, index });
        &self.solutions[index]
    }

    pub fn solutions(&self) -> &[EvaluatedSolution] {
        &self.solutions
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn best(&self) -> Option<&EvaluatedSolution> {
        self.best.map(|b| &self.solutions[b])
    }

    pub fn best_value(&self) -> f64 {
        self.best().map_or(f64::INFINITY, |b| b.value)
    }
}
