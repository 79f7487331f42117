//! Deterministic English-like training corpus for the n-gram backend.
//!
//! A small weighted grammar over the vocabulary of the shipped suites plus
//! a few hundred common words drawn with Zipfian frequencies. Subjects
//! prefer their usual verbs only mildly, relative clauses pick their words
//! at random, and one-off names keep `<unk>` in the training data.

#![allow(dead_code)]

use syneval::rng::SplitMix64;

/// (inanimate noun, animate noun, transitive verb, intransitive verb)
pub const PAIRS: &[(&str, &str, &str, &str)] = &[
    ("diamond", "thief", "stole", "glittered"),
    ("painting", "collector", "bought", "faded"),
    ("bridge", "engineer", "designed", "collapsed"),
    ("cake", "baker", "baked", "burned"),
    ("ship", "captain", "steered", "sank"),
    ("letter", "clerk", "wrote", "vanished"),
    ("vase", "maid", "dropped", "shattered"),
    ("engine", "mechanic", "repaired", "roared"),
    ("candle", "priest", "lit", "flickered"),
    ("balloon", "child", "released", "floated"),
    ("river", "farmer", "crossed", "flooded"),
    ("window", "burglar", "broke", "rattled"),
    ("song", "singer", "performed", "echoed"),
    ("bell", "monk", "rang", "chimed"),
    ("tree", "gardener", "planted", "blossomed"),
    ("lamp", "student", "bought", "glowed"),
    ("car", "driver", "parked", "rolled"),
    ("ice", "skater", "crossed", "melted"),
    ("bread", "cook", "baked", "rose"),
    ("door", "guard", "locked", "creaked"),
    ("sword", "knight", "carried", "gleamed"),
    ("clock", "collector", "wound", "ticked"),
    ("fire", "camper", "started", "spread"),
    ("tower", "architect", "designed", "swayed"),
    ("milk", "farmer", "poured", "spoiled"),
    ("kite", "boy", "flew", "soared"),
    ("phone", "manager", "answered", "rang"),
    ("wall", "mason", "built", "crumbled"),
    ("star", "astronomer", "observed", "twinkled"),
    ("flower", "girl", "picked", "wilted"),
    ("rumor", "reporter", "spread", "circulated"),
    ("soup", "chef", "cooked", "boiled"),
    ("boat", "fisherman", "rowed", "drifted"),
    ("volcano", "scientist", "studied", "erupted"),
    ("glass", "waiter", "filled", "cracked"),
    ("snow", "worker", "cleared", "fell"),
    ("rocket", "pilot", "launched", "exploded"),
    ("coin", "banker", "counted", "sparkled"),
    ("dress", "tailor", "sewed", "shimmered"),
    ("storm", "sailor", "predicted", "raged"),
];

const PEOPLE: &[&str] = &[
    "man", "woman", "teacher", "doctor", "friend", "king", "queen", "officer", "lawyer", "nurse",
    "count", "baron", "duke", "senator", "actress", "hostess", "countess", "butler", "guests",
    "bishop", "general", "mayor", "soldier", "painter", "neighbor", "stranger", "judge", "poet",
];
const THINGS: &[&str] = &[
    "house", "book", "table", "road", "box", "garden", "paper", "picture", "key", "money", "room",
    "chair", "bag", "city", "village", "horse", "dog", "cat", "hat", "coat", "ring", "map", "gate",
    "field", "hill", "lake", "train", "wagon", "basket", "bottle", "plate", "rope", "stone",
];
const TRANSITIVE: &[&str] = &[
    "saw", "took", "found", "made", "gave", "kept", "left", "met", "held", "sold", "brought",
    "moved", "opened", "liked", "wanted", "used", "followed", "watched", "called", "showed",
    "insulted", "praised", "ignored", "thanked", "visited", "noticed", "hid", "painted",
];
const INTRANSITIVE: &[&str] = &[
    "stopped",
    "moved",
    "waited",
    "changed",
    "disappeared",
    "stood",
    "fell",
    "arrived",
    "remained",
    "shook",
    "broke",
    "opened",
    "closed",
    "turned",
    "returned",
    "worked",
    "smiled",
    "slept",
];
const NAMES: &[&str] = &["Mary", "John", "Susan", "Peter"];
const SOCIAL: &[(&str, &str)] = &[
    ("insulted", "insulting"),
    ("praised", "praising"),
    ("ignored", "ignoring"),
    ("thanked", "thanking"),
    ("visited", "visiting"),
];
const TALK: &[&str] = &["talked", "spoke", "argued"];
const PREFIX: &[&str] = &["I know", "We heard", "They said", "She forgot"];
const TIME: &[&str] = &[
    "yesterday",
    "today",
    "recently",
    "again",
    "after dinner",
    "last night",
    "in the morning",
];
const PREP: &[&str] = &["in", "with", "from", "near", "on", "at", "behind"];
const ADJ: &[&str] = &[
    "old", "young", "black", "small", "famous", "tired", "gold", "front", "southern", "northern",
    "city", "big", "red", "new", "quiet",
];
const PLACE_NOUNS: &[&str] = &[
    "mask", "watch", "town", "door", "province", "castle", "coast", "capital", "theatre", "party",
    "balcony", "garden", "room", "street", "house",
];

pub struct Synth {
    rng: SplitMix64,
    rare: u64,
}

impl Synth {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: SplitMix64::new(seed),
            rare: 0,
        }
    }

    fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    fn chance(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    fn pick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs[self.rng.below(xs.len() as u64) as usize]
    }

    /// Index with probability proportional to 1 / (rank + 1).
    fn zipf(&mut self, n: usize) -> usize {
        let h: f64 = (1..=n).map(|k| 1.0 / k as f64).sum();
        let mut u = self.uniform() * h;
        for k in 0..n {
            u -= 1.0 / (k + 1) as f64;
            if u <= 0.0 {
                return k;
            }
        }
        n - 1
    }

    fn zpick<'a>(&mut self, xs: &[&'a str]) -> &'a str {
        xs[self.zipf(xs.len())]
    }

    fn pair(&mut self) -> (&'static str, &'static str, &'static str, &'static str) {
        PAIRS[self.rng.below(PAIRS.len() as u64) as usize]
    }

    fn rare_name(&mut self) -> String {
        self.rare += 1;
        format!("Name{}", self.rare)
    }

    fn determiner(&mut self) -> &'static str {
        match self.rng.below(10) {
            0 => "a",
            1 => "his",
            2 => "her",
            _ => "the",
        }
    }

    fn pp(&mut self) -> String {
        let adj = if self.chance(0.6) {
            format!("{} ", self.zpick(ADJ))
        } else {
            String::new()
        };
        format!("{} the {adj}{}", self.zpick(PREP), self.zpick(PLACE_NOUNS))
    }

    fn np(&mut self, head: &str) -> String {
        let mut np = String::from(self.determiner());
        if self.chance(0.15) {
            np.push(' ');
            np.push_str(self.zpick(ADJ));
        }
        np.push(' ');
        np.push_str(head);
        if self.chance(0.1) {
            np.push(' ');
            np.push_str(&self.pp());
        }
        np
    }

    fn animate(&mut self) -> String {
        if self.chance(0.01) {
            return self.rare_name();
        }
        if self.chance(0.1) {
            return self.pick(NAMES).to_string();
        }
        let head = if self.chance(0.4) {
            self.pair().1
        } else {
            self.zpick(PEOPLE)
        };
        self.np(head)
    }

    fn inanimate(&mut self) -> String {
        let head = if self.chance(0.4) {
            self.pair().0
        } else {
            self.zpick(THINGS)
        };
        self.np(head)
    }

    fn any_np(&mut self) -> String {
        if self.chance(0.5) {
            self.animate()
        } else {
            self.inanimate()
        }
    }

    fn transitive(&mut self) -> &'static str {
        if self.chance(0.4) {
            self.pair().2
        } else {
            self.zpick(TRANSITIVE)
        }
    }

    fn intransitive(&mut self) -> &'static str {
        if self.chance(0.4) {
            self.pair().3
        } else {
            self.zpick(INTRANSITIVE)
        }
    }

    fn clause(&mut self) -> String {
        let body = match self.rng.below(100) {
            // agent with a mild preference for its usual verb and object
            0..=29 => {
                let p = self.pair();
                let verb = if self.chance(0.3) {
                    p.2
                } else {
                    self.transitive()
                };
                let obj = if self.chance(0.3) {
                    self.np(p.0)
                } else {
                    self.any_np()
                };
                format!("{} {verb} {obj}", self.np(p.1))
            }
            30..=44 => {
                let (s, v, o) = (self.animate(), self.transitive(), self.any_np());
                format!("{s} {v} {o}")
            }
            // theme with a mild preference for its usual verb
            45..=59 => {
                let p = self.pair();
                let verb = if self.chance(0.3) {
                    p.3
                } else {
                    self.intransitive()
                };
                format!("{} {verb}", self.np(p.0))
            }
            60..=64 => {
                let (s, v) = (self.inanimate(), self.intransitive());
                format!("{s} {v}")
            }
            // relative clauses with random words
            65..=67 => {
                let (head, subj, v1, v2) = (
                    self.any_np(),
                    self.animate(),
                    self.transitive(),
                    self.intransitive(),
                );
                format!("{head} that {subj} {v1} {v2}")
            }
            68..=71 => {
                let (head, v1, obj, v2) = (
                    self.animate(),
                    self.transitive(),
                    self.any_np(),
                    self.intransitive(),
                );
                format!("{head} that {v1} {obj} {v2}")
            }
            // talk and social verbs
            72..=83 => {
                let (s, o) = (self.animate(), self.animate());
                let loud = if self.chance(0.2) { " very loudly" } else { "" };
                format!("{s} {}{loud} with {o}", self.pick(TALK))
            }
            84..=91 => {
                let (s, o) = (self.animate(), self.animate());
                format!(
                    "{s} {} {o}",
                    SOCIAL[self.rng.below(SOCIAL.len() as u64) as usize].0
                )
            }
            // adjunct clauses
            _ => {
                let (past, ing) = SOCIAL[self.rng.below(SOCIAL.len() as u64) as usize];
                let adjunct = if self.chance(0.5) {
                    format!("after {ing} {}", self.animate())
                } else {
                    format!("after {} {past} {}", self.animate(), self.animate())
                };
                let (s, o) = (self.animate(), self.animate());
                format!("{adjunct} , {s} {} with {o}", self.pick(TALK))
            }
        };
        if self.chance(0.25) {
            let t = if self.chance(0.5) {
                self.pick(TIME).to_string()
            } else {
                self.pp()
            };
            format!("{body} {t}")
        } else {
            body
        }
    }

    /// Embedded that/wh clauses, with object or subject gaps after `who`.
    fn embedded(&mut self) -> String {
        let prefix = self.pick(PREFIX);
        let verb = SOCIAL[self.rng.below(SOCIAL.len() as u64) as usize].0;
        let subj = self.animate();
        let post = if self.chance(0.5) {
            self.pick(TIME).to_string()
        } else {
            self.pp()
        };
        match self.rng.below(5) {
            0 | 1 => format!("{prefix} that {subj} {verb} {} {post}", self.animate()),
            2 => format!("{prefix} who {subj} {verb} {post}"),
            3 => format!("{prefix} who {verb} {} {post}", self.animate()),
            _ => format!("{prefix} that {}", self.clause()),
        }
    }

    pub fn sentence(&mut self) -> String {
        let body = if self.chance(0.2) {
            self.embedded()
        } else {
            self.clause()
        };
        let mut s = capitalize(&body);
        s.push_str(" .");
        s
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Sentences until at least `tokens` whitespace tokens.
pub fn corpus(seed: u64, tokens: usize) -> Vec<String> {
    let mut g = Synth::new(seed);
    let mut out = Vec::new();
    let mut n = 0;
    while n < tokens {
        let s = g.sentence();
        n += s.split_whitespace().count();
        out.push(s);
    }
    out
}
