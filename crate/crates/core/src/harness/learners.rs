//! Example oracle and reference learners for the distinguishing game.
//!
//! The oracle hands out labeled examples drawn uniformly with replacement
//! from a fixed sample, under a hard draw budget. Learners produce a
//! predictor after consuming at most that budget; the references bracket
//! the achievable losses (a cheater that already holds the realizing
//! network, a constant-1/2 baseline, and a table memorizer).

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::gadget::LabeledSample;
use crate::neural::NetworkWeights;
use crate::rng::rng_for;

/// Total function on inputs of the sample's dimension.
pub type Predictor = Box<dyn Fn(&[f64]) -> f64>;

pub struct ExampleOracle<'a> {
    sample: &'a LabeledSample,
    rng: ChaCha12Rng,
    budget: usize,
    draws: usize,
}

impl<'a> ExampleOracle<'a> {
    pub fn new(sample: &'a LabeledSample, budget: usize, seed: u64) -> Self {
        ExampleOracle {
            sample,
            rng: rng_for(seed, "oracle"),
            budget,
            draws: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.sample.dim()
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn draws_used(&self) -> usize {
        self.draws
    }

    /// One labeled example, uniform with replacement.
    pub fn draw(&mut self) -> Result<(&'a [f64], u8)> {
        if self.draws >= self.budget {
            return Err(Error::BudgetExceeded {
                draws: self.draws + 1,
                budget: self.budget,
            });
        }
        self.draws += 1;
        let i = self.rng.gen_range(0..self.sample.len());
        let p = &self.sample.points()[i];
        Ok((&p.x, p.y))
    }
}

pub trait Learner {
    fn name(&self) -> &'static str;

    /// Consume oracle draws (at most the budget) and return a predictor.
    fn fit(&mut self, oracle: &mut ExampleOracle<'_>) -> Result<Predictor>;
}

/// Holds the realizing network up front and never draws.
pub struct CheatingLearner {
    pub weights: NetworkWeights,
}

impl Learner for CheatingLearner {
    fn name(&self) -> &'static str {
        "cheating"
    }

    fn fit(&mut self, _oracle: &mut ExampleOracle<'_>) -> Result<Predictor> {
        let w = self.weights.clone();
        Ok(Box::new(move |x| w.eval(x).unwrap_or(0.5)))
    }
}

/// Constant 1/2; squared loss is exactly 1/4 against any 0/1 labels.
pub struct ConstantLearner;

impl Learner for ConstantLearner {
    fn name(&self) -> &'static str {
        "constant"
    }

    fn fit(&mut self, _oracle: &mut ExampleOracle<'_>) -> Result<Predictor> {
        Ok(Box::new(|_| 0.5))
    }
}

/// Spends the whole budget memorizing draws bitwise; unseen inputs score 1/2.
pub struct MemorizingLearner;

fn bit_key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

impl Learner for MemorizingLearner {
    fn name(&self) -> &'static str {
        "memorizing"
    }

    fn fit(&mut self, oracle: &mut ExampleOracle<'_>) -> Result<Predictor> {
        let mut table: HashMap<Vec<u64>, f64> = HashMap::new();
        while oracle.draws_used() < oracle.budget() {
            let (x, y) = oracle.draw()?;
            table.insert(bit_key(x), y as f64);
        }
        Ok(Box::new(move |x| *table.get(&bit_key(x)).unwrap_or(&0.5)))
    }
}
