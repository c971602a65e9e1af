use std::collections::HashMap;

use thiserror::Error;

use super::{compound_count, Compound, GlossAnnotation};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("line {line}: {detail}")]
    Malformed { line: usize, detail: String },
}

/// Highest compound count wins; ties go to the byte-wise smallest rendering.
pub fn choose_representative(members: &[Compound]) -> &Compound {
    members
        .iter()
        .max_by(|a, b| {
            compound_count(a)
                .cmp(&compound_count(b))
                .then_with(|| b.render().cmp(&a.render()))
        })
        .expect("homosign group is nonempty")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomosignClass {
    pub representative: Compound,
    /// All members, representative included, sorted by rendering.
    pub members: Vec<Compound>,
}

/// Globally merged homosign classes with one representative each.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HomosignRegistry {
    classes: Vec<HomosignClass>,
    index: HashMap<Compound, usize>,
}

struct DisjointSet {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
    }
}

impl HomosignRegistry {
    /// Merges all groups that share at least one member (after modifier
    /// stripping).
    pub fn from_groups<I, G>(groups: I) -> Self
    where
        I: IntoIterator<Item = G>,
        G: AsRef<[Compound]>,
    {
        let mut ids: HashMap<Compound, usize> = HashMap::new();
        let mut items: Vec<Compound> = Vec::new();
        let mut edges: Vec<(usize, usize)> = Vec::new();
        for group in groups {
            let mut first = None;
            for c in group.as_ref() {
                let c = c.normalized();
                let id = *ids.entry(c.clone()).or_insert_with(|| {
                    items.push(c);
                    items.len() - 1
                });
                match first {
                    None => first = Some(id),
                    Some(f) => edges.push((f, id)),
                }
            }
        }
        let mut dsu = DisjointSet::new(items.len());
        for (a, b) in edges {
            dsu.union(a, b);
        }
        let mut by_root: HashMap<usize, Vec<Compound>> = HashMap::new();
        for (id, c) in items.into_iter().enumerate() {
            by_root.entry(dsu.find(id)).or_default().push(c);
        }
        let classes = by_root
            .into_values()
            .filter(|m| m.len() >= 2)
            .map(|mut members| {
                members.sort_by_key(Compound::render);
                HomosignClass {
                    representative: choose_representative(&members).clone(),
                    members,
                }
            })
            .collect();
        Self::from_classes(classes)
    }

    pub fn from_annotations<'a, I>(annotations: I) -> Self
    where
        I: IntoIterator<Item = &'a GlossAnnotation>,
    {
        let groups: Vec<Vec<Compound>> = annotations
            .into_iter()
            .flat_map(|a| a.homosign_groups().map(<[Compound]>::to_vec).collect::<Vec<_>>())
            .collect();
        Self::from_groups(groups)
    }

    fn from_classes(mut classes: Vec<HomosignClass>) -> Self {
        classes.sort_by_key(|c| c.representative.render());
        let mut index = HashMap::new();
        for (i, class) in classes.iter().enumerate() {
            for m in &class.members {
                index.insert(m.clone(), i);
            }
        }
        HomosignRegistry { classes, index }
    }

    pub fn classes(&self) -> &[HomosignClass] {
        &self.classes
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn class_of(&self, c: &Compound) -> Option<&HomosignClass> {
        self.index.get(c).map(|&i| &self.classes[i])
    }

    pub fn representative(&self, c: &Compound) -> Option<&Compound> {
        self.class_of(c).map(|k| &k.representative)
    }

    /// One class per line: representative first, then the other members,
    /// space separated.
    pub fn to_dump(&self) -> String {
        let mut out = String::new();
        for class in &self.classes {
            out.push_str(&class.representative.render());
            for m in class.members.iter().filter(|m| **m != class.representative) {
                out.push(' ');
                out.push_str(&m.render());
            }
            out.push('\n');
        }
        out
    }

    /// Reads [`to_dump`](Self::to_dump) output; the first entry of each line
    /// is taken as the representative.
    pub fn from_dump(text: &str) -> Result<Self, RegistryError> {
        let mut classes = Vec::new();
        let mut seen: HashMap<Compound, usize> = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line_no = i + 1;
            let members: Vec<Compound> = line
                .split_whitespace()
                .map(|m| {
                    if m.split('+').any(|u| u.is_empty() || u.contains(['(', ')', '='])) {
                        Err(RegistryError::Malformed {
                            line: line_no,
                            detail: format!("invalid member {m:?}"),
                        })
                    } else {
                        Ok(Compound::from_plain_text(m))
                    }
                })
                .collect::<Result<_, _>>()?;
            if members.is_empty() {
                continue;
            }
            if members.len() < 2 {
                return Err(RegistryError::Malformed {
                    line: line_no,
                    detail: "class needs at least two members".into(),
                });
            }
            for m in &members {
                if let Some(prev) = seen.insert(m.clone(), line_no) {
                    return Err(RegistryError::Malformed {
                        line: line_no,
                        detail: format!("{m} already listed on line {prev}"),
                    });
                }
            }
            let representative = members[0].clone();
            let mut sorted = members;
            sorted.sort_by_key(Compound::render);
            classes.push(HomosignClass {
                representative,
                members: sorted,
            });
        }
        Ok(Self::from_classes(classes))
    }
}
