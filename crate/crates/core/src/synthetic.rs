//! Seeded generator for a small film-domain corpus: a triple store, type
//! table, names, alias lexicon, word vectors and question splits.
//!
//! Every film carries the same set of relations. Questions come from
//! templates. In "easy" templates a question word also appears in the
//! correct relation's name. In "hard" templates it appears in a distractor
//! relation whose answers have a different notable type, and only a cue word
//! (aligned with the answer type in embedding space) points at the right
//! answer.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::error::Result;
use crate::pipeline::{dataset_to_ndjson, write_text, QAPair};

pub const DEFAULT_SEED: u64 = 20_180_901;
pub const FILMS: usize = 60;
pub const QUESTIONS_PER_FILM: usize = 4;
pub const SPLIT_SIZES: [usize; 2] = [140, 50];

const DIM: usize = 24;
const PERSON: usize = 0;
const PLACE: usize = 1;
const THING: usize = 2;
const ACT: usize = 3;
const DIRECT: usize = 4;
const COMPOSE: usize = 5;
const WRITE: usize = 6;
const CITY: usize = 7;
const COUNTRY: usize = 8;
const FILM: usize = 9;
const FREE: std::ops::Range<usize> = 10..DIM;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Role {
    Director,
    Actor,
    Composer,
    Writer,
}

impl Role {
    const ALL: [Role; 4] = [Role::Director, Role::Actor, Role::Composer, Role::Writer];

    fn label(self) -> &'static str {
        match self {
            Role::Director => "film director",
            Role::Actor => "film actor",
            Role::Composer => "composer",
            Role::Writer => "writer",
        }
    }
}

/// Which answer of a film a template asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Director,
    Actors,
    Composer,
    Writer,
    FilmingCity,
    Country,
}

struct Template {
    text: &'static str,
    target: Target,
    hard: bool,
}

const TEMPLATES: &[Template] = &[
    Template {
        text: "who directed {}",
        target: Target::Director,
        hard: false,
    },
    Template {
        text: "who was starring in {}",
        target: Target::Actors,
        hard: false,
    },
    Template {
        text: "who composed {}",
        target: Target::Composer,
        hard: false,
    },
    Template {
        text: "who wrote the screenplay of {}",
        target: Target::Writer,
        hard: false,
    },
    Template {
        text: "where is the filming location of {}",
        target: Target::FilmingCity,
        hard: false,
    },
    Template {
        text: "who was nominated for acting in {}",
        target: Target::Actors,
        hard: true,
    },
    Template {
        text: "who made the music for {}",
        target: Target::Composer,
        hard: true,
    },
    Template {
        text: "who wrote the story of {}",
        target: Target::Writer,
        hard: true,
    },
    Template {
        text: "who played the character in {}",
        target: Target::Actors,
        hard: true,
    },
    Template {
        text: "where was {} released",
        target: Target::Country,
        hard: true,
    },
];

const NAME_FIRST: &[&str] = &[
    "silent", "crimson", "hidden", "broken", "golden", "distant", "hollow", "frozen", "burning",
    "quiet", "wild", "lonely", "secret", "electric", "velvet", "iron", "paper", "glass",
    "midnight", "northern",
];
const NAME_SECOND: &[&str] = &[
    "harbor", "garden", "river", "mirror", "empire", "voyage", "signal", "orchard", "lantern",
    "kingdom", "echo", "horizon", "canyon", "letter", "compass", "meadow", "tide", "circus",
    "station", "island",
];
const GIVEN: &[&str] = &[
    "ada", "bruno", "clara", "dmitri", "elena", "farid", "greta", "hugo", "ines", "jonas", "kira",
    "lars", "mira", "nadia", "oscar", "priya", "quentin", "rosa", "soren", "tamar", "umar", "vera",
    "willem", "xenia", "yusuf", "zora",
];
const FAMILY: &[&str] = &[
    "abara", "bellini", "castell", "dumont", "eriksen", "falk", "goran", "halloway", "ivers",
    "jansen", "kowal", "lindgren", "moreau", "novak", "okafor", "pereira", "quist", "ramos",
    "sato", "tovar",
];
const CITIES: &[&str] = &[
    "arden",
    "belmora",
    "corvel",
    "dunhollow",
    "estmere",
    "fallowby",
    "granport",
    "halvik",
    "islen",
    "jorvale",
    "kestrel bay",
    "lowmarsh",
];
const COUNTRIES: &[&str] = &[
    "veloria", "ostrand", "marvania", "quellon", "tiberra", "suvalle",
];
const AWARDS: &[&str] = &[
    "golden reel",
    "silver frame",
    "audience prize",
    "critics circle",
    "jury medal",
];
const DISTRIBUTORS: &[&str] = &[
    "northlight pictures",
    "bluecrest films",
    "amberline",
    "stonegate media",
];
const GENRES: &[&str] = &[
    "drama", "thriller", "comedy", "western", "romance", "mystery",
];

/// Question words, stopwords and relation tokens that get free-space
/// vectors only.
const PLAIN_WORDS: &[&str] = &[
    "is",
    "was",
    "the",
    "of",
    "for",
    "in",
    "a",
    "made",
    "directed",
    "by",
    "starring",
    "composed",
    "screenplay",
    "filming",
    "location",
    "origin",
    "nominated",
    "released",
    "story",
    "premiere",
    "place",
    "birth",
    "nationality",
    "contained",
    "soundtrack",
    "source",
    "novel",
    "distributor",
    "genre",
];

struct Embeddings {
    rng: ChaCha8Rng,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl Embeddings {
    fn free(&mut self, norm: f64) -> Vec<f64> {
        let mut v = vec![0.0; DIM];
        for x in &mut v[FREE] {
            *x = self.rng.gen_range(-1.0..1.0);
        }
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x *= norm / n);
        v
    }

    /// Axis components plus free-space noise of the given norm.
    fn add(&mut self, word: &str, axes: &[(usize, f64)], noise: f64) {
        if self.vectors.contains_key(word) {
            return;
        }
        let mut v = if noise > 0.0 {
            self.free(noise)
        } else {
            vec![0.0; DIM]
        };
        for &(axis, weight) in axes {
            v[axis] += weight;
        }
        self.vectors.insert(word.to_string(), v);
    }

    fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.vectors.len(), DIM);
        for (w, v) in &self.vectors {
            out.push_str(w);
            for x in v {
                let _ = write!(out, " {x:.4}");
            }
            out.push('\n');
        }
        out
    }
}

struct Film {
    id: String,
    name: String,
    director: usize,
    actors: Vec<usize>,
    composer: usize,
    writer: usize,
    city: usize,
    country: usize,
}

/// The generated files, keyed by file name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticCorpus {
    pub files: BTreeMap<&'static str, String>,
    pub hard_questions: usize,
    pub questions: usize,
}

impl SyntheticCorpus {
    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, content) in &self.files {
            write_text(dir.join(name), content)?;
        }
        Ok(())
    }
}

fn slug(s: &str) -> String {
    s.replace(' ', "_")
}

pub fn generate(seed: u64) -> SyntheticCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // People: distinct names, one role each.
    let mut full_names: Vec<String> = GIVEN
        .iter()
        .flat_map(|g| FAMILY.iter().map(move |f| format!("{g} {f}")))
        .collect();
    full_names.shuffle(&mut rng);
    let per_role = 24;
    let people: Vec<(String, Role)> = Role::ALL
        .iter()
        .flat_map(|&r| std::iter::repeat_n(r, per_role))
        .zip(full_names)
        .map(|(r, n)| (n, r))
        .collect();
    let by_role =
        |role: Role| -> Vec<usize> { (0..people.len()).filter(|&i| people[i].1 == role).collect() };
    let directors = by_role(Role::Director);
    let actors = by_role(Role::Actor);
    let composers = by_role(Role::Composer);
    let writers = by_role(Role::Writer);

    let mut film_names: Vec<String> = NAME_FIRST
        .iter()
        .flat_map(|a| NAME_SECOND.iter().map(move |b| format!("{a} {b}")))
        .collect();
    film_names.shuffle(&mut rng);
    let films: Vec<Film> = film_names
        .into_iter()
        .take(FILMS)
        .enumerate()
        .map(|(i, name)| {
            let cast = rng.gen_range(1..=2);
            Film {
                id: format!("m.film_{i:02}"),
                name,
                director: *directors.choose(&mut rng).expect("non-empty"),
                actors: actors.choose_multiple(&mut rng, cast).copied().collect(),
                composer: *composers.choose(&mut rng).expect("non-empty"),
                writer: *writers.choose(&mut rng).expect("non-empty"),
                city: rng.gen_range(0..CITIES.len()),
                country: rng.gen_range(0..COUNTRIES.len()),
            }
        })
        .collect();

    let person_id = |i: usize| format!("m.{}", slug(&people[i].0));
    let city_id = |i: usize| format!("m.{}", slug(CITIES[i]));
    let country_id = |i: usize| format!("m.{}", slug(COUNTRIES[i]));

    let mut triples = String::new();
    let mut types: Vec<(String, String)> = Vec::new();
    let mut names: Vec<(String, String)> = Vec::new();
    let mut t = |s: &str, p: &str, o: &str, kind: Option<&str>| {
        let _ = match kind {
            Some(k) => writeln!(triples, "{s}\t{p}\t{o}\t{k}"),
            None => writeln!(triples, "{s}\t{p}\t{o}"),
        };
    };

    for (i, c) in COUNTRIES.iter().enumerate() {
        types.push((country_id(i), "country".into()));
        names.push((country_id(i), c.to_string()));
    }
    for (i, c) in CITIES.iter().enumerate() {
        t(
            &city_id(i),
            "location.location.contained_by",
            &country_id(i % COUNTRIES.len()),
            None,
        );
        types.push((city_id(i), "city".into()));
        names.push((city_id(i), c.to_string()));
    }
    for (i, (name, role)) in people.iter().enumerate() {
        let id = person_id(i);
        t(
            &id,
            "people.person.place_of_birth",
            &city_id(rng.gen_range(0..CITIES.len())),
            None,
        );
        t(
            &id,
            "people.person.nationality",
            &country_id(rng.gen_range(0..COUNTRIES.len())),
            None,
        );
        types.push((id.clone(), role.label().into()));
        types.push((id.clone(), "person".into()));
        names.push((id, name.clone()));
    }
    for (kind, label, list) in [
        ("award", "award category", AWARDS),
        ("distributor", "film distributor", DISTRIBUTORS),
        ("genre", "film genre", GENRES),
    ] {
        for item in list {
            let id = format!("m.{kind}_{}", slug(item));
            types.push((id.clone(), label.into()));
            names.push((id, item.to_string()));
        }
    }

    for (i, f) in films.iter().enumerate() {
        let film = &f.id;
        t(film, "film.film.directed_by", &person_id(f.director), None);
        for (k, &a) in f.actors.iter().enumerate() {
            let cvt = format!("m.perf_{i:02}_{k}");
            let character = format!("m.character_{i:02}_{k}");
            t(film, "film.film.starring", &cvt, None);
            t(&cvt, "film.performance.actor", &person_id(a), None);
            t(&cvt, "film.performance.character", &character, None);
            types.push((character.clone(), "film character".into()));
            names.push((
                character,
                format!(
                    "{} {}",
                    GIVEN[(i + k * 7) % GIVEN.len()],
                    NAME_SECOND[(i + k) % NAME_SECOND.len()]
                ),
            ));
        }
        t(film, "film.film.composed_by", &person_id(f.composer), None);
        t(film, "film.film.screenplay_by", &person_id(f.writer), None);
        t(film, "film.film.filming_location", &city_id(f.city), None);
        t(
            film,
            "film.film.country_of_origin",
            &country_id(f.country),
            None,
        );
        t(
            film,
            "film.film.nominated",
            &format!(
                "m.award_{}",
                slug(AWARDS.choose(&mut rng).expect("non-empty"))
            ),
            None,
        );
        t(
            film,
            "film.film.released_by",
            &format!(
                "m.distributor_{}",
                slug(DISTRIBUTORS.choose(&mut rng).expect("non-empty"))
            ),
            None,
        );
        t(
            film,
            "film.film.genre",
            &format!(
                "m.genre_{}",
                slug(GENRES.choose(&mut rng).expect("non-empty"))
            ),
            None,
        );

        let album = format!("m.album_{i:02}");
        t(film, "film.film.music", &album, None);
        types.push((album.clone(), "musical album".into()));
        names.push((album, format!("{} soundtrack", f.name)));

        let book = format!("m.book_{i:02}");
        t(film, "film.film.story", &book, None);
        types.push((book.clone(), "written work".into()));
        names.push((book, format!("{} novel", f.name)));

        let year = 1950 + rng.gen_range(0..70);
        t(
            film,
            "film.film.release_date",
            &format!("{year}-0{}-1{}", rng.gen_range(1..10), rng.gen_range(0..10)),
            Some("date"),
        );
        types.push((film.clone(), "film".into()));
        names.push((film.clone(), f.name.clone()));
    }

    // Questions: each film gets distinct templates.
    let mut pairs = Vec::new();
    let mut hard_questions = 0;
    for f in &films {
        let picked: Vec<&Template> = TEMPLATES
            .choose_multiple(&mut rng, QUESTIONS_PER_FILM)
            .collect();
        for tpl in picked {
            let answers: Vec<String> = match tpl.target {
                Target::Director => vec![people[f.director].0.clone()],
                Target::Actors => f.actors.iter().map(|&a| people[a].0.clone()).collect(),
                Target::Composer => vec![people[f.composer].0.clone()],
                Target::Writer => vec![people[f.writer].0.clone()],
                Target::FilmingCity => vec![CITIES[f.city].to_string()],
                Target::Country => vec![COUNTRIES[f.country].to_string()],
            };
            hard_questions += usize::from(tpl.hard);
            pairs.push(QAPair {
                id: String::new(),
                question: tpl.text.replace("{}", &f.name),
                answers,
            });
        }
    }
    pairs.shuffle(&mut rng);
    for (i, p) in pairs.iter_mut().enumerate() {
        p.id = format!("q{i:03}");
    }
    let (train, rest) = pairs.split_at(SPLIT_SIZES[0]);
    let (valid, test) = rest.split_at(SPLIT_SIZES[1]);

    // Word vectors. Type words sit on typed axes; wh-words and cue words
    // lean on the same axes; everything else lives in the free subspace.
    let mut emb = Embeddings {
        rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5eed),
        vectors: BTreeMap::new(),
    };
    emb.add("who", &[(PERSON, 1.0)], 0.2);
    emb.add("where", &[(PLACE, 1.0)], 0.2);
    emb.add("person", &[(PERSON, 1.0)], 0.0);
    emb.add("film", &[(FILM, 1.0)], 0.0);
    emb.add("actor", &[(PERSON, 0.8), (ACT, 0.6)], 0.0);
    emb.add("director", &[(PERSON, 0.8), (DIRECT, 0.6)], 0.0);
    emb.add("composer", &[(PERSON, 0.8), (COMPOSE, 0.6)], 0.0);
    emb.add("writer", &[(PERSON, 0.8), (WRITE, 0.6)], 0.0);
    emb.add("city", &[(PLACE, 0.8), (CITY, 0.6)], 0.0);
    emb.add("country", &[(PLACE, 0.8), (COUNTRY, 0.6)], 0.0);
    for w in [
        "award",
        "category",
        "musical",
        "album",
        "written",
        "work",
        "character",
        "festival",
        "event",
    ] {
        emb.add(w, &[(THING, 0.8)], 0.6);
    }
    emb.add("acting", &[(ACT, 0.9)], 0.4);
    emb.add("played", &[(ACT, 0.8)], 0.5);
    emb.add("music", &[(COMPOSE, 0.6)], 0.8);
    emb.add("wrote", &[(WRITE, 0.8)], 0.5);
    for w in PLAIN_WORDS {
        emb.add(w, &[], 1.0);
    }
    for w in NAME_FIRST.iter().chain(NAME_SECOND) {
        emb.add(w, &[], 1.0);
    }

    let mut lexicon = String::new();
    for f in &films {
        let _ = writeln!(lexicon, "{}\t{}", f.name, f.id);
    }
    let tsv = |rows: &[(String, String)]| {
        rows.iter()
            .map(|(a, b)| format!("{a}\t{b}\n"))
            .collect::<String>()
    };

    let config = json!({
        "kb_triples": "triples.tsv",
        "kb_types": "types.tsv",
        "names": "names.tsv",
        "lexicon": "lexicon.tsv",
        "embeddings": "embeddings.txt",
        "train": "train.jsonl",
        "valid": "valid.jsonl",
        "test": "test.jsonl",
        "type_top_k": 0,
        "negatives_per_positive": 10,
        "learning_rate": 0.1,
        "epochs": 20,
        "seed": seed,
        "top_n": 10,
    });

    let mut files = BTreeMap::new();
    files.insert("triples.tsv", triples);
    files.insert("types.tsv", tsv(&types));
    files.insert("names.tsv", tsv(&names));
    files.insert("lexicon.tsv", lexicon);
    files.insert("embeddings.txt", emb.to_text());
    files.insert("train.jsonl", dataset_to_ndjson(train));
    files.insert("valid.jsonl", dataset_to_ndjson(valid));
    files.insert("test.jsonl", dataset_to_ndjson(test));
    files.insert(
        "config.json",
        serde_json::to_string_pretty(&config).expect("json") + "\n",
    );
    SyntheticCorpus {
        files,
        hard_questions,
        questions: pairs.len(),
    }
}
