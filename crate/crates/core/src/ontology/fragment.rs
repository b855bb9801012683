use std::collections::{BTreeSet, VecDeque};

use super::{Ontology, OntologyError};

impl Ontology {
    /// A self-contained sub-ontology around `roots`: every concept within
    /// `depth` edges of a root (any predicate, either direction), the
    /// relations among them and the bindings onto them.
    pub fn extract_fragment<S: AsRef<str>>(&self, roots: &[S], depth: usize) -> Result<Ontology, OntologyError> {
        let mut keep: BTreeSet<&str> = BTreeSet::new();
        let mut queue = VecDeque::new();
        for r in roots {
            let r = r.as_ref();
            let Some(c) = self.concepts.get_key_value(r) else {
                return Err(OntologyError::UnknownConcept(r.to_string()));
            };
            if keep.insert(c.0.as_str()) {
                queue.push_back((c.0.as_str(), 0usize));
            }
        }
        while let Some((c, d)) = queue.pop_front() {
            if d >= depth {
                continue;
            }
            for n in self.neighbours(c) {
                if keep.insert(n) {
                    queue.push_back((n, d + 1));
                }
            }
        }

        let mut fragment = Ontology::new();
        for uri in &keep {
            fragment.add_concept(self.concepts[*uri].clone())?;
        }
        for rel in &self.relations {
            if keep.contains(rel.subject.as_str()) && keep.contains(rel.object.as_str()) {
                fragment.add_relation(rel.clone())?;
            }
        }
        for (cvt, uri) in &self.bindings {
            if keep.contains(uri.as_str()) {
                fragment.bind(cvt.clone(), uri.clone())?;
            }
        }
        Ok(fragment)
    }
}
