//! Global archive of non-dominated (cost, convergence-factor) programs
//! and its CSV/file exports.

use crate::error::Result;
use crate::solver::FitnessPair;
use std::path::Path;

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub dsl: String,
    pub fitness: FitnessPair,
    pub generation: usize,
}

/// Pairwise non-dominated archive over all generations. Penalty
/// fitnesses never enter; identical programs are kept once.
#[derive(Debug, Default, Clone)]
pub struct ParetoFront {
    entries: Vec<ArchiveEntry>,
}

impl ParetoFront {
    pub fn insert(&mut self, dsl: &str, fitness: FitnessPair, generation: usize) {
        if fitness.penalty {
            return;
        }
        if self.entries.iter().any(|e| e.dsl == dsl) {
            return;
        }
        if self
            .entries
            .iter()
            .any(|e| e.fitness.dominates(&fitness))
        {
            return;
        }
        self.entries.retain(|e| !fitness.dominates(&e.fitness));
        self.entries.push(ArchiveEntry {
            dsl: dsl.to_string(),
            fitness,
            generation,
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries sorted by the first objective (ties by the second, then
    /// program text).
    pub fn sorted_entries(&self) -> Vec<&ArchiveEntry> {
        let mut v: Vec<&ArchiveEntry> = self.entries.iter().collect();
        v.sort_by(|a, b| {
            a.fitness
                .cost_per_iter
                .partial_cmp(&b.fitness.cost_per_iter)
                .unwrap()
                .then(
                    a.fitness
                        .conv_factor
                        .partial_cmp(&b.fitness.conv_factor)
                        .unwrap(),
                )
                .then(a.dsl.cmp(&b.dsl))
        });
        v
    }

    pub fn is_pairwise_non_dominated(&self) -> bool {
        let n = self.entries.len();
        for i in 0..n {
            for j in 0..n {
                if i != j && self.entries[i].fitness.dominates(&self.entries[j].fitness) {
                    return false;
                }
            }
        }
        true
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("cost_per_iter,conv_factor,generation,dsl\n");
        for e in self.sorted_entries() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.fitness.cost_per_iter, e.fitness.conv_factor, e.generation, e.dsl
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<ParetoFront> {
        let mut front = ParetoFront::default();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.trim().is_empty() {
                continue;
            }
            let mut parts = line.splitn(4, ',');
            let parse = |s: Option<&str>| -> Result<f64> {
                s.ok_or_else(|| {
                    crate::error::Error::Config(format!("archive line {}: too few fields", i + 1))
                })?
                .parse()
                .map_err(|e| crate::error::Error::Config(format!("archive line {}: {e}", i + 1)))
            };
            let cost = parse(parts.next())?;
            let conv = parse(parts.next())?;
            let generation = parts
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| {
                    crate::error::Error::Config(format!("archive line {}: bad generation", i + 1))
                })?;
            let dsl = parts
                .next()
                .ok_or_else(|| {
                    crate::error::Error::Config(format!("archive line {}: missing program", i + 1))
                })?
                .to_string();
            front.entries.push(ArchiveEntry {
                dsl,
                fitness: FitnessPair {
                    cost_per_iter: cost,
                    conv_factor: conv,
                    penalty: false,
                },
                generation,
            });
        }
        Ok(front)
    }

    /// Write `pareto.csv` plus one `.cycle` file per member into `dir`.
    pub fn export(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("pareto.csv"), self.to_csv())?;
        for (i, e) in self.sorted_entries().iter().enumerate() {
            let name = format!("pareto_{i:03}.cycle");
            let body = format!(
                "# cost_per_iter={} conv_factor={} generation={}\n{}\n",
                e.fitness.cost_per_iter, e.fitness.conv_factor, e.generation, e.dsl
            );
            std::fs::write(dir.join(name), body)?;
        }
        Ok(())
    }
}

/// One row of the per-generation progress log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenStats {
    pub generation: usize,
    pub min_cost_per_iter: f64,
    pub min_conv_factor: f64,
    pub archive_size: usize,
}

pub fn stats_csv(stats: &[GenStats]) -> String {
    let mut out = String::from("generation,min_cost_per_iter,min_conv_factor,archive_size\n");
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.generation, s.min_cost_per_iter, s.min_conv_factor, s.archive_size
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(c: f64, r: f64) -> FitnessPair {
        FitnessPair {
            cost_per_iter: c,
            conv_factor: r,
            penalty: false,
        }
    }

    #[test]
    fn dominated_entries_are_evicted() {
        let mut front = ParetoFront::default();
        front.insert("a", pair(2.0, 2.0), 0);
        front.insert("b", pair(1.0, 3.0), 1);
        assert_eq!(front.len(), 2);
        front.insert("c", pair(1.0, 1.0), 2);
        assert_eq!(front.len(), 1);
        assert_eq!(front.sorted_entries()[0].dsl, "c");
        assert!(front.is_pairwise_non_dominated());
    }

    #[test]
    fn penalty_never_enters() {
        let mut front = ParetoFront::default();
        front.insert("bad", FitnessPair::penalty(), 0);
        assert!(front.is_empty());
    }

    #[test]
    fn dominated_insert_is_ignored() {
        let mut front = ParetoFront::default();
        front.insert("a", pair(1.0, 1.0), 0);
        front.insert("b", pair(2.0, 2.0), 1);
        assert_eq!(front.len(), 1);
    }

    #[test]
    fn singleton_csv_roundtrip() {
        let mut front = ParetoFront::default();
        front.insert("s:gsf:1.00", pair(1.25, 0.125), 3);
        let csv = front.to_csv();
        assert_eq!(csv.lines().count(), 2);
        let again = ParetoFront::from_csv(&csv).unwrap();
        assert_eq!(again.len(), 1);
        let e = again.sorted_entries()[0].clone();
        assert_eq!(e.dsl, "s:gsf:1.00");
        assert_eq!(e.fitness.cost_per_iter, 1.25);
        assert_eq!(e.generation, 3);
        assert!(again.is_pairwise_non_dominated());
    }

    #[test]
    fn csv_column_order_is_stable() {
        let front = ParetoFront::default();
        assert!(front
            .to_csv()
            .starts_with("cost_per_iter,conv_factor,generation,dsl"));
        assert!(stats_csv(&[])
            .starts_with("generation,min_cost_per_iter,min_conv_factor,archive_size"));
    }
}
