//! Seeded generators for the shipped datasets and the generic corpus.
//!
//! The ecommerce-style set pairs product searches with a matching phrase and
//! an optional condition; the `Price >`, `Size =` and `Subscribe =` templates
//! are held out of training.
//! The generic corpus is unrelated text plus sentences that state price,
//! size, delivery and subscription facts in words and in comparison form,
//! and simple facts about the geography entities.
//! The GeoQuery-style set has 30 templates over a small US geography schema.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::constraint::Schema;
use crate::error::{Error, Result};
use crate::eval::{
    anonymize_template, make_compositional_split, Dataset, Example, Split, TemplateFamily,
};
use crate::grammar::{ClauseId, SchemeDef};
use crate::pipeline::{PipelineConfig, TrainOptions};

const PRODUCTS: &[&str] = &[
    "petrol trimmer",
    "mobile phone",
    "usb cable",
    "coffee maker",
    "running shoes",
    "gaming mouse",
    "office chair",
    "memory card",
    "water bottle",
    "yoga mat",
    "desk lamp",
    "laptop bag",
    "hair dryer",
    "wireless earbuds",
    "phone case",
    "flash drive",
    "smart watch",
    "camera lens",
    "electric kettle",
    "tablet stand",
];

const PRICES: &[u32] = &[
    10, 15, 20, 25, 30, 40, 50, 60, 75, 80, 100, 120, 150, 200, 250, 300, 400, 500,
];
const SIZES: &[u32] = &[8, 16, 32, 64, 128, 256, 512];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Atom {
    PriceLt,
    PriceGt,
    PriceEq,
    SizeLt,
    SizeGt,
    SizeEq,
    Prime,
    FreeDelivery,
    Subscribe,
}

impl Atom {
    const ALL: [Atom; 9] = [
        Atom::PriceLt,
        Atom::PriceGt,
        Atom::PriceEq,
        Atom::SizeLt,
        Atom::SizeGt,
        Atom::SizeEq,
        Atom::Prime,
        Atom::FreeDelivery,
        Atom::Subscribe,
    ];

    /// Condition text with `{num}` where the number goes.
    fn pattern(self) -> &'static str {
        match self {
            Atom::PriceLt => "Price < {num}",
            Atom::PriceGt => "Price > {num}",
            Atom::PriceEq => "Price = {num}",
            Atom::SizeLt => "Size < {num} gb",
            Atom::SizeGt => "Size > {num} gb",
            Atom::SizeEq => "Size = {num} gb",
            Atom::Prime => "Delivery = prime",
            Atom::FreeDelivery => "Delivery = free",
            Atom::Subscribe => "Subscribe = True",
        }
    }

    fn attribute(self) -> usize {
        match self {
            Atom::PriceLt | Atom::PriceGt | Atom::PriceEq => 0,
            Atom::SizeLt | Atom::SizeGt | Atom::SizeEq => 1,
            Atom::Prime | Atom::FreeDelivery => 2,
            Atom::Subscribe => 3,
        }
    }

    /// Ways a shopper says it; `{n}` is the number.
    fn phrasings(self) -> &'static [&'static str] {
        match self {
            Atom::PriceLt => &[
                "under {n} dollar",
                "below {n} dollar",
                "less than {n} dollar",
                "cheaper than {n} dollar",
            ],
            Atom::PriceGt => &[
                "over {n} dollar",
                "above {n} dollar",
                "more than {n} dollar",
            ],
            Atom::PriceEq => &[
                "for {n} dollar",
                "priced at {n} dollar",
                "at exactly {n} dollar",
            ],
            Atom::SizeLt => &["smaller than {n} gb", "under {n} gb", "less than {n} gb"],
            Atom::SizeGt => &[
                "over {n} gb",
                "more than {n} gb",
                "larger than {n} gb",
                "above {n} gb",
            ],
            Atom::SizeEq => &["{n} gb", "with {n} gb"],
            Atom::Prime => &["with prime delivery", "prime shipping"],
            Atom::FreeDelivery => &["with free delivery", "free shipping"],
            Atom::Subscribe => &["subscribe and save", "with subscription"],
        }
    }

    fn number(self, rng: &mut ChaCha8Rng) -> Option<u32> {
        match self.attribute() {
            0 => Some(*PRICES.choose(rng).expect("prices")),
            1 => Some(*SIZES.choose(rng).expect("sizes")),
            _ => None,
        }
    }
}

/// Condition shapes of the ecommerce set, one SQL template each.
const SHAPES: &[&[Atom]] = &[
    &[],
    &[Atom::PriceLt],
    &[Atom::PriceEq],
    &[Atom::SizeGt],
    &[Atom::SizeLt],
    &[Atom::Prime],
    &[Atom::FreeDelivery],
    &[Atom::PriceLt, Atom::SizeGt],
    &[Atom::PriceLt, Atom::Prime],
    &[Atom::PriceEq, Atom::SizeGt],
    &[Atom::PriceLt, Atom::FreeDelivery],
    &[Atom::SizeGt, Atom::Prime],
    &[Atom::SizeLt, Atom::FreeDelivery],
    &[Atom::PriceEq, Atom::Prime],
    // held out of training
    &[Atom::PriceGt],
    &[Atom::PriceGt, Atom::SizeGt],
    &[Atom::PriceGt, Atom::Prime],
    &[Atom::SizeEq],
    &[Atom::SizeEq, Atom::Prime],
    &[Atom::Subscribe],
];

/// Template families of the ecommerce set that never occur in training.
pub fn held_out_families() -> Vec<TemplateFamily> {
    vec![
        TemplateFamily::new("price_gt", "Price >"),
        TemplateFamily::new("size_eq", "Size ="),
        TemplateFamily::new("subscribe", "Subscribe ="),
    ]
}

/// Ecommerce scheme whose condition clause may take any one atom or any
/// pair of atoms on different attributes, in attribute order.
pub fn ecommerce_scheme() -> SchemeDef {
    let mut def = SchemeDef::ecommerce();
    let mut grammar: Vec<String> = Atom::ALL.iter().map(|a| a.pattern().to_string()).collect();
    for a in Atom::ALL {
        for b in Atom::ALL {
            if a.attribute() < b.attribute() {
                grammar.push(format!("{} and {}", a.pattern(), b.pattern()));
            }
        }
    }
    let cond = def
        .clauses
        .iter_mut()
        .find(|c| c.id.as_str() == "condition")
        .expect("ecommerce scheme has a condition clause");
    cond.sources.grammar = grammar;
    def
}

fn fill(pattern: &str, key: &str, n: Option<u32>) -> String {
    match n {
        Some(n) => pattern.replace(key, &n.to_string()),
        None => pattern.to_string(),
    }
}

fn ecommerce_example(shape: &[Atom], rng: &mut ChaCha8Rng) -> Example {
    let product = *PRODUCTS.choose(rng).expect("products");
    let mut conds = Vec::new();
    let mut phrases = Vec::new();
    for &atom in shape {
        let n = atom.number(rng);
        conds.push(fill(atom.pattern(), "{num}", n));
        let phrase = atom.phrasings().choose(rng).expect("phrasings");
        phrases.push(fill(phrase, "{n}", n));
    }
    let cond_text = phrases.join(if rng.gen_bool(0.5) { " " } else { " and " });
    let utterance = match (rng.gen_range(0..4), cond_text.is_empty()) {
        (_, true) => match rng.gen_range(0..3) {
            0 => product.to_string(),
            1 => format!("show me {product}"),
            _ => format!("i want a {product}"),
        },
        (0, false) => format!("{product} {cond_text}"),
        (1, false) => format!("show me {product} {cond_text}"),
        (2, false) => format!("{cond_text} {product}"),
        _ => format!("i want a {product} {cond_text}"),
    };
    let condition = (!conds.is_empty()).then(|| conds.join(" and "));
    let mut sql = format!("SELECT * FROM ASINs WHERE Maching Algorithm(\"{product}\") == True");
    if let Some(c) = &condition {
        sql.push_str(" and ");
        sql.push_str(c);
    }
    let clauses = BTreeMap::from([
        (ClauseId::from("matching"), Some(product.to_string())),
        (ClauseId::from("condition"), condition),
    ]);
    Example {
        utterance,
        template: anonymize_template(&sql),
        sql,
        clauses,
        split: None,
    }
}

/// `per_template` examples for each condition shape, no split assigned.
pub fn ecommerce_examples(seed: u64, per_template: usize) -> Vec<Example> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SHAPES
        .iter()
        .flat_map(|shape| (0..per_template).map(|_| *shape).collect::<Vec<_>>())
        .map(|shape| ecommerce_example(shape, &mut rng))
        .collect()
}

/// The shipped ecommerce-style dataset: 20 templates x 15 examples, split
/// 0.7 / 0.15 / 0.15 by template with the [`held_out_families`] kept out of
/// training.
pub fn ecommerce_dataset(seed: u64) -> Result<Dataset> {
    make_compositional_split(
        ecommerce_examples(seed, 15),
        [0.7, 0.15, 0.15],
        seed,
        &held_out_families(),
    )
}

const FILLER: &[&str] = &[
    "the weather is nice today and we went for a walk",
    "she reads a book every night before bed",
    "the train to the city leaves at nine",
    "my brother plays football on the weekend",
    "we cooked pasta with tomato sauce for dinner",
    "the museum is closed on monday",
    "he forgot his keys at the office again",
    "the children painted the fence in the garden",
    "it rained all afternoon so the match was cancelled",
    "our neighbours adopted a small dog",
    "the meeting starts after lunch",
    "they planted three trees near the river",
    "the shop around the corner sells fresh bread",
    "i need to call my mother this evening",
    "the movie was longer than we expected",
];

fn corpus_line(rng: &mut ChaCha8Rng) -> String {
    let product = *PRODUCTS.choose(rng).expect("products");
    let price = *PRICES.choose(rng).expect("prices");
    let size = *SIZES.choose(rng).expect("sizes");
    let choose = |rng: &mut ChaCha8Rng, xs: &[&str]| xs.choose(rng).expect("options").to_string();
    match rng.gen_range(0..18) {
        0..=3 => choose(rng, FILLER),
        4 => {
            let w = choose(rng, &["over", "above", "more than"]);
            format!("this {product} costs {w} {price} dollar so price > {price}")
        }
        5 => {
            let w = choose(rng, &["under", "below", "less than", "cheaper than"]);
            format!("this {product} costs {w} {price} dollar so price < {price}")
        }
        6 => {
            let w = choose(rng, &["for", "exactly", "priced at"]);
            format!("they sell the {product} {w} {price} dollar so price = {price}")
        }
        7 => {
            let w = choose(rng, &["over", "more than", "larger than", "above"]);
            format!("a drive with {w} {size} gb has size > {size} gb")
        }
        8 => {
            let w = choose(rng, &["under", "less than", "smaller than", "below"]);
            format!("a drive with {w} {size} gb has size < {size} gb")
        }
        9 => format!("a card with {size} gb has size = {size} gb"),
        10 => {
            let (w, v) = *[
                ("prime delivery", "prime"),
                ("prime shipping", "prime"),
                ("free delivery", "free"),
                ("free shipping", "free"),
            ]
            .choose(rng)
            .expect("delivery");
            format!("orders with {w} have delivery = {v}")
        }
        11 => {
            let w = choose(rng, &["subscribe and save", "a subscription"]);
            format!("items with {w} have subscribe = true")
        }
        12 => {
            let w = choose(rng, &["over", "above", "more than", "under", "below"]);
            let rel = if ["under", "below"].contains(&w.as_str()) {
                "<"
            } else {
                ">"
            };
            let (d, v) = *[
                ("prime shipping", "prime"),
                ("free shipping", "free"),
                ("prime delivery", "prime"),
                ("free delivery", "free"),
            ]
            .choose(rng)
            .expect("delivery");
            format!("a {w} {price} dollar {product} with {d} means price {rel} {price} and delivery = {v}")
        }
        14..=15 => {
            let state = *STATES.choose(rng).expect("states");
            let city = *CITIES.choose(rng).expect("cities");
            let river = *RIVERS.choose(rng).expect("rivers");
            let options = [
                format!("{city} is a city in {state} and the population of the city is large"),
                format!("the state of {state} has a big area and a small population"),
                format!("the {river} river runs through {state} and the river is long"),
                format!("{state} borders another state and its capital is a city"),
                format!("the city called {city} has city_name = \"{city}\""),
                format!("the state called {state} has state_name = \"{state}\""),
                format!("the river called {river} has river_name = \"{river}\""),
            ];
            options.choose(rng).expect("geography").clone()
        }
        16..=17 => {
            let state = *STATES.choose(rng).expect("states");
            let mountain = *MOUNTAINS.choose(rng).expect("mountains");
            let lake = *LAKES.choose(rng).expect("lakes");
            let n = rng.gen_range(1..=20) * 50_000;
            let options = [
                format!("mount {mountain} has mountain_name = \"{mountain}\""),
                format!("lake {lake} has lake_name = \"{lake}\""),
                format!("mount {mountain} is a high mountain in {state}"),
                format!("lake {lake} is a lake in {state} with a large area"),
                format!("a state with an area above {n} has area > {n}"),
                format!("a city with more than {n} people has population > {n}"),
            ];
            options.choose(rng).expect("geography").clone()
        }
        _ => choose(
            rng,
            &[
                &format!("i bought a {product} last week"),
                &format!("the {product} arrived yesterday"),
                &format!("my friend recommended this {product}"),
                &format!("is the {product} worth the money"),
            ],
        ),
    }
}

/// Generic corpus of `lines` sentences, one per line.
pub fn generic_corpus(seed: u64, lines: usize) -> Vec<String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..lines).map(|_| corpus_line(&mut rng)).collect()
}

const STATES: &[&str] = &[
    "utah", "texas", "ohio", "iowa", "maine", "nevada", "oregon", "alaska", "idaho", "kansas",
    "montana", "florida", "georgia", "arizona", "colorado", "michigan", "virginia", "wyoming",
    "vermont", "nebraska",
];
const CITIES: &[&str] = &[
    "austin", "dallas", "houston", "boston", "denver", "seattle", "portland", "chicago", "atlanta",
    "miami", "phoenix", "reno", "boise", "omaha", "tucson",
];
const RIVERS: &[&str] = &[
    "colorado",
    "mississippi",
    "missouri",
    "ohio",
    "red",
    "snake",
    "platte",
    "hudson",
];
const MOUNTAINS: &[&str] = &["mckinley", "whitney", "rainier", "elbert", "hood", "shasta"];
const LAKES: &[&str] = &["tahoe", "superior", "erie", "michigan", "champlain"];

/// Schema of the GeoQuery-style set.
pub fn geoquery_schema() -> Schema {
    let t = |cols: &[&str]| cols.iter().map(|c| c.to_string()).collect::<Vec<_>>();
    Schema {
        tables: BTreeMap::from([
            (
                "state".into(),
                t(&["state_name", "population", "area", "capital", "density"]),
            ),
            ("city".into(), t(&["city_name", "state_name", "population"])),
            ("river".into(), t(&["river_name", "length", "traverse"])),
            ("lake".into(), t(&["lake_name", "area", "state_name"])),
            (
                "mountain".into(),
                t(&["mountain_name", "height", "state_name"]),
            ),
            ("border_info".into(), t(&["state_name", "border"])),
        ]),
    }
}

const NUMERIC_COLUMNS: &[&str] = &["population", "area", "density", "length", "height"];

/// GeoQuery scheme with grammar candidates derived from [`geoquery_schema`]:
/// equality on name columns against utterance n-grams, comparisons on
/// numeric columns against utterance numerals, counts, and superlatives.
pub fn geoquery_scheme() -> SchemeDef {
    let mut def = SchemeDef::geoquery();
    let schema = geoquery_schema();
    let (mut select, mut where_, mut order_by) = (Vec::new(), Vec::new(), Vec::new());
    for (table, cols) in &schema.tables {
        for c in cols {
            let col = format!("{table} . {c}");
            select.push(format!("COUNT ( {col} )"));
            if NUMERIC_COLUMNS.contains(&c.as_str()) {
                where_.push(format!("{col} > {{num}}"));
                where_.push(format!("{col} < {{num}}"));
                order_by.push(format!("{col} DESC LIMIT 1"));
                order_by.push(format!("{col} ASC LIMIT 1"));
            } else {
                where_.push(format!("{col} = \"{{ngram}}\""));
            }
        }
    }
    for clause in &mut def.clauses {
        match clause.id.as_str() {
            "select" => clause.sources.grammar = select.clone(),
            "where" => clause.sources.grammar = where_.clone(),
            "order_by" => clause.sources.grammar = order_by.clone(),
            _ => {}
        }
    }
    def
}

#[derive(Clone, Copy)]
enum Entity {
    None,
    State,
    City,
    River,
    Mountain,
    Lake,
    Number,
}

/// (question, entity kind, from, select, where, group by, order by); `{e}`
/// is the entity.
type GeoTemplate = (
    &'static str,
    Entity,
    &'static str,
    &'static str,
    Option<&'static str>,
    Option<&'static str>,
    Option<&'static str>,
);

const GEO_TEMPLATES: &[GeoTemplate] = &[
    (
        "what is the population of {e}",
        Entity::State,
        "state",
        "state . population",
        Some(r#"state . state_name = "{e}""#),
        None,
        None,
    ),
    (
        "how big is {e}",
        Entity::State,
        "state",
        "state . area",
        Some(r#"state . state_name = "{e}""#),
        None,
        None,
    ),
    (
        "what is the capital of {e}",
        Entity::State,
        "state",
        "state . capital",
        Some(r#"state . state_name = "{e}""#),
        None,
        None,
    ),
    (
        "what is the population density of {e}",
        Entity::State,
        "state",
        "state . density",
        Some(r#"state . state_name = "{e}""#),
        None,
        None,
    ),
    (
        "how many people live in {e}",
        Entity::City,
        "city",
        "city . population",
        Some(r#"city . city_name = "{e}""#),
        None,
        None,
    ),
    (
        "which state is {e} in",
        Entity::City,
        "city",
        "city . state_name",
        Some(r#"city . city_name = "{e}""#),
        None,
        None,
    ),
    (
        "how long is the {e} river",
        Entity::River,
        "river",
        "river . length",
        Some(r#"river . river_name = "{e}""#),
        None,
        None,
    ),
    (
        "which states does the {e} river run through",
        Entity::River,
        "river",
        "river . traverse",
        Some(r#"river . river_name = "{e}""#),
        None,
        None,
    ),
    (
        "how high is mount {e}",
        Entity::Mountain,
        "mountain",
        "mountain . height",
        Some(r#"mountain . mountain_name = "{e}""#),
        None,
        None,
    ),
    (
        "where is mount {e}",
        Entity::Mountain,
        "mountain",
        "mountain . state_name",
        Some(r#"mountain . mountain_name = "{e}""#),
        None,
        None,
    ),
    (
        "how big is lake {e}",
        Entity::Lake,
        "lake",
        "lake . area",
        Some(r#"lake . lake_name = "{e}""#),
        None,
        None,
    ),
    (
        "which state is lake {e} in",
        Entity::Lake,
        "lake",
        "lake . state_name",
        Some(r#"lake . lake_name = "{e}""#),
        None,
        None,
    ),
    (
        "what cities are in {e}",
        Entity::State,
        "city",
        "city . city_name",
        Some(r#"city . state_name = "{e}""#),
        None,
        None,
    ),
    (
        "what rivers flow through {e}",
        Entity::State,
        "river",
        "river . river_name",
        Some(r#"river . traverse = "{e}""#),
        None,
        None,
    ),
    (
        "what states border {e}",
        Entity::State,
        "border_info",
        "border_info . border",
        Some(r#"border_info . state_name = "{e}""#),
        None,
        None,
    ),
    (
        "what mountains are in {e}",
        Entity::State,
        "mountain",
        "mountain . mountain_name",
        Some(r#"mountain . state_name = "{e}""#),
        None,
        None,
    ),
    (
        "what lakes are in {e}",
        Entity::State,
        "lake",
        "lake . lake_name",
        Some(r#"lake . state_name = "{e}""#),
        None,
        None,
    ),
    (
        "which state has the largest population",
        Entity::None,
        "state",
        "state . state_name",
        None,
        None,
        Some("state . population DESC LIMIT 1"),
    ),
    (
        "which state has the smallest area",
        Entity::None,
        "state",
        "state . state_name",
        None,
        None,
        Some("state . area ASC LIMIT 1"),
    ),
    (
        "what is the longest river",
        Entity::None,
        "river",
        "river . river_name",
        None,
        None,
        Some("river . length DESC LIMIT 1"),
    ),
    (
        "what is the highest mountain",
        Entity::None,
        "mountain",
        "mountain . mountain_name",
        None,
        None,
        Some("mountain . height DESC LIMIT 1"),
    ),
    (
        "what is the biggest city in {e}",
        Entity::State,
        "city",
        "city . city_name",
        Some(r#"city . state_name = "{e}""#),
        None,
        Some("city . population DESC LIMIT 1"),
    ),
    (
        "how many cities does {e} have",
        Entity::State,
        "city",
        "COUNT ( city . city_name )",
        Some(r#"city . state_name = "{e}""#),
        None,
        None,
    ),
    (
        "how many rivers are in {e}",
        Entity::State,
        "river",
        "COUNT ( river . river_name )",
        Some(r#"river . traverse = "{e}""#),
        None,
        None,
    ),
    (
        "how many states border {e}",
        Entity::State,
        "border_info",
        "COUNT ( border_info . border )",
        Some(r#"border_info . state_name = "{e}""#),
        None,
        None,
    ),
    (
        "how many cities are in each state",
        Entity::None,
        "city",
        "city . state_name , COUNT ( city . city_name )",
        None,
        Some("city . state_name"),
        None,
    ),
    (
        "how many lakes are in each state",
        Entity::None,
        "lake",
        "lake . state_name , COUNT ( lake . lake_name )",
        None,
        Some("lake . state_name"),
        None,
    ),
    (
        "what cities have more than {e} people",
        Entity::Number,
        "city",
        "city . city_name",
        Some("city . population > {e}"),
        None,
        None,
    ),
    (
        "which states have an area above {e}",
        Entity::Number,
        "state",
        "state . state_name",
        Some("state . area > {e}"),
        None,
        None,
    ),
    (
        "which rivers are longer than {e}",
        Entity::Number,
        "river",
        "river . river_name",
        Some("river . length > {e}"),
        None,
        None,
    ),
];

const GEO_PREFIXES: &[&str] = &[
    "",
    "",
    "please tell me ",
    "can you tell me ",
    "i would like to know ",
];

fn geo_example(t: &GeoTemplate, rng: &mut ChaCha8Rng) -> Example {
    let (question, kind, from, select, where_, group_by, order_by) = *t;
    let entity = match kind {
        Entity::None => String::new(),
        Entity::State => STATES.choose(rng).expect("states").to_string(),
        Entity::City => CITIES.choose(rng).expect("cities").to_string(),
        Entity::River => RIVERS.choose(rng).expect("rivers").to_string(),
        Entity::Mountain => MOUNTAINS.choose(rng).expect("mountains").to_string(),
        Entity::Lake => LAKES.choose(rng).expect("lakes").to_string(),
        Entity::Number => (rng.gen_range(1..=20) * 50_000).to_string(),
    };
    let sub = |s: &str| s.replace("{e}", &entity);
    let prefix = GEO_PREFIXES.choose(rng).expect("prefixes");
    let utterance = format!("{prefix}{}", sub(question));
    let where_ = where_.map(sub);
    let mut sql = format!("SELECT {select} FROM {from}");
    for (kw, v) in [
        ("WHERE", &where_),
        ("GROUP BY", &group_by.map(str::to_string)),
        ("ORDER BY", &order_by.map(str::to_string)),
    ] {
        if let Some(v) = v {
            sql.push_str(&format!(" {kw} {v}"));
        }
    }
    let clauses = BTreeMap::from([
        (ClauseId::from("from"), Some(from.to_string())),
        (ClauseId::from("select"), Some(select.to_string())),
        (ClauseId::from("where"), where_),
        (ClauseId::from("group_by"), group_by.map(str::to_string)),
        (ClauseId::from("order_by"), order_by.map(str::to_string)),
    ]);
    Example {
        utterance,
        template: anonymize_template(&sql),
        sql,
        clauses,
        split: None,
    }
}

/// GeoQuery-style dataset with 536 / 159 / 182 train / dev / test examples
/// and 18 / 6 / 6 templates.
pub fn geoquery_dataset(seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..GEO_TEMPLATES.len()).collect();
    order.shuffle(&mut rng);
    // per-template example counts for each split
    let plan: [(Split, &[usize]); 3] = [
        (
            Split::Train,
            &[
                30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 30, 29, 29, 29, 29,
            ],
        ),
        (Split::Dev, &[27, 27, 27, 26, 26, 26]),
        (Split::Test, &[31, 31, 30, 30, 30, 30]),
    ];
    let mut next = order.into_iter();
    let mut examples = Vec::new();
    for (split, counts) in plan {
        for &count in counts {
            let t = &GEO_TEMPLATES[next.next().expect("30 templates")];
            for _ in 0..count {
                let mut ex = geo_example(t, &mut rng);
                ex.split = Some(split);
                examples.push(ex);
            }
        }
    }
    Dataset { examples }
}

/// Seed of the shipped data files.
pub const SHIPPED_SEED: u64 = 7;
/// Line count of the shipped generic corpus.
pub const SHIPPED_CORPUS_LINES: usize = 3000;

/// Names accepted by [`shipped_files`].
pub const SHIPPED_DATASETS: &[&str] = &["ecommerce", "geoquery"];

/// Contents of a shipped data directory as `(file name, text)` pairs:
/// `dataset.jsonl`, `scheme.json`, `schema.json`, `config.json` (pointing at
/// `scheme.json`), `train_options.json` and `corpus.txt`.
pub fn shipped_files(name: &str, seed: u64) -> Result<Vec<(&'static str, String)>> {
    let (dataset, scheme, schema) = match name {
        "ecommerce" => (
            ecommerce_dataset(seed)?,
            ecommerce_scheme(),
            Schema::default(),
        ),
        "geoquery" => (geoquery_dataset(seed), geoquery_scheme(), geoquery_schema()),
        other => {
            return Err(Error::Config(format!(
                "unknown dataset `{other}`, expected one of {SHIPPED_DATASETS:?}"
            )))
        }
    };
    let mut config = serde_json::to_value(PipelineConfig::new(scheme.clone()))?;
    let obj = config.as_object_mut().expect("config is an object");
    obj.insert("scheme".into(), "scheme.json".into());
    obj.remove("whole_query");
    obj.remove("remote_zero");
    let pretty =
        |v: &serde_json::Value| -> Result<String> { Ok(serde_json::to_string_pretty(v)? + "\n") };
    let mut corpus = generic_corpus(seed, SHIPPED_CORPUS_LINES).join("\n");
    corpus.push('\n');
    Ok(vec![
        ("dataset.jsonl", dataset.to_jsonl()?),
        ("scheme.json", pretty(&serde_json::to_value(&scheme)?)?),
        ("schema.json", pretty(&serde_json::to_value(&schema)?)?),
        ("config.json", pretty(&config)?),
        (
            "train_options.json",
            pretty(&serde_json::to_value(TrainOptions::default())?)?,
        ),
        ("corpus.txt", corpus),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ecommerce_examples_compose() {
        let def = ecommerce_scheme();
        def.validate().unwrap();
        for ex in ecommerce_examples(1, 3) {
            ex.check_composition(&def).unwrap();
        }
    }

    #[test]
    fn ecommerce_split_holds_out_families() {
        let ds = ecommerce_dataset(SHIPPED_SEED).unwrap();
        assert_eq!(ds.templates().len(), SHAPES.len());
        for f in held_out_families() {
            assert!(
                ds.split(Split::Train).iter().all(|e| !f.matches(&e.sql)),
                "{}",
                f.name
            );
        }
        assert!(ds
            .split(Split::Test)
            .iter()
            .any(|e| e.sql.contains("Price >")));
        assert!(ds
            .split(Split::Dev)
            .iter()
            .any(|e| e.sql.contains("Price >")));
        ds.check_no_leakage().unwrap();
    }

    #[test]
    fn geoquery_sizes_and_composition() {
        let ds = geoquery_dataset(SHIPPED_SEED);
        let c = ds.counts();
        assert_eq!(
            (c[&Split::Train], c[&Split::Dev], c[&Split::Test]),
            (536, 159, 182)
        );
        assert_eq!(ds.templates().len(), 30);
        ds.check_no_leakage().unwrap();
        let def = geoquery_scheme();
        def.validate().unwrap();
        for ex in ds.examples.iter().take(50) {
            ex.check_composition(&def).unwrap();
        }
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(generic_corpus(3, 50), generic_corpus(3, 50));
        assert_eq!(ecommerce_examples(3, 2), ecommerce_examples(3, 2));
    }
}
