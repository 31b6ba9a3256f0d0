//! Deterministic generator for the bundled demo project: 200 synthetic
//! complaints from 1992-01 to 1995-12 with a power-steering-lock surge in
//! 1995, a constant fleet of 1000 products, the reference custom topics, a stop
//! list and a synonym table.

#![allow(dead_code)]

use std::fs;
use std::io;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 1995;
pub const POPULATION: u32 = 1000;

const STEERING: &[&str] = &[
    "the power steering locked up while turning into a parking lot",
    "steering wheel locked and would not turn at low speed",
    "lost power steering assist and the steering locked stiff",
    "power steering pump failed and the steering wheel locked",
    "power steering locks intermittently when turning left",
];

const BACKGROUND: &[&[&str]] = &[
    // brakes
    &[
        "brake pedal went to the floor and the vehicle would not stop",
        "brakes make a grinding noise when stopping",
        "abs warning light came on and the brakes felt soft",
        "rear brakes locked up on wet pavement",
    ],
    // stalling
    &[
        "engine stalled without warning at an intersection",
        "vehicle stalls when idling and will not restart",
        "engine died on the freeway and would not restart",
        "strong smell of gas before the engine stalled",
    ],
    // electrical
    &[
        "dashboard lights flicker and the battery drains overnight",
        "power windows and door locks stopped working",
        "headlights went dark while driving at night",
        "battery light flickers and the gauges stop working",
    ],
    // transmission
    &[
        "transmission slips between gears on the highway",
        "hard shift from second to third gear",
        "transmission would not engage reverse",
        "transmission fluid leak and the gears slip",
    ],
    // speed control
    &[
        "accelerator pedal stuck and the car surged forward",
        "cruise control would not disengage when braking",
        "gas pedal stuck under the floor mat",
        "vehicle speed control failed and the engine raced",
    ],
];

const OPENERS: &[&str] = &[
    "",
    "While driving at 45 mph,",
    "My 1991 sedan with 32000 miles:",
    "Consumer states that",
    "On the way to work",
];

const CLOSERS: &[&str] = &[
    "",
    "Dealer was unable to repair.",
    "It happened twice in one week.",
    "The vehicle was driven to the dealer.",
    "Vibrations were felt before the failure.",
];

const CONSEQUENCES: &[&str] = &[
    "This resulted in a crash.",
    "This caused a collision with another vehicle.",
    "I was involved in an accident.",
];

pub const STOPLIST: &str = "\
# function words
a
about
an
and
at
before
for
from
i
in
into
is
it
my
not
of
on
states
that
the
this
to
under
was
were
when
while
with
would
";

pub const SYNONYMS: &str = "\
variant,canonical
driven,drive
car,vehicle
automobile,vehicle
";

pub const CUSTOM_TOPICS: &str = "\
topic,term,weight
Vehicle Speed Control,accelerator,0.9
Vehicle Speed Control,gas pedal,0.9
Vehicle Speed Control,cruise control,0.8
Vehicle Speed Control,vehicle speed control,0.8
Accident,accident,0.9
Accident,crash,0.9
Accident,collision,0.9
";

pub const CONFIG: &str = "\
corpus = \"corpus.jsonl\"
population = \"population.csv\"
stop_list = \"stoplist.txt\"
synonyms = \"synonyms.csv\"
custom_topics = \"custom_topics.csv\"
output_dir = \"out\"
min_df = 4
k = 25
top_m = 8
tau = 0.25
cutoff_sigma = 1.0
n = 3
threshold = 1.0
exposure_mode = \"per_product\"
seed = 0
";

/// Steering complaints per 1995 quarter.
pub const SURGE: [usize; 4] = [2, 4, 6, 8];

fn sentence(rng: &mut ChaCha8Rng, issue: &str) -> String {
    let opener = OPENERS.choose(rng).unwrap();
    let closer = CLOSERS.choose(rng).unwrap();
    let mut s = String::new();
    if !opener.is_empty() {
        s.push_str(opener);
        s.push(' ');
    }
    s.push_str(issue);
    s.push('.');
    if rng.gen_bool(0.15) {
        s.push(' ');
        s.push_str(CONSEQUENCES.choose(rng).unwrap());
    }
    if !closer.is_empty() {
        s.push(' ');
        s.push_str(closer);
    }
    s
}

fn background(rng: &mut ChaCha8Rng) -> String {
    let group = BACKGROUND.choose(rng).unwrap();
    let issue = *group.choose(rng).unwrap();
    sentence(rng, issue)
}

fn steering(rng: &mut ChaCha8Rng) -> String {
    let issue = *STEERING.choose(rng).unwrap();
    // an occasional misspelling for the spelling-suggestion step
    let issue = if rng.gen_bool(0.1) {
        issue.replacen("steering", "steeering", 1)
    } else {
        issue.to_string()
    };
    sentence(rng, &issue)
}

/// `(date, text)` records in date order.
pub fn records() -> Vec<(String, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut out = Vec::new();
    // six baseline steering complaints, spread over the 36 months
    let steering_months = [3usize, 9, 15, 21, 27, 33];
    for m in 0..36 {
        let (year, month) = (1992 + m / 12, m % 12 + 1);
        let mut days: Vec<u32> = (0..4).map(|_| rng.gen_range(1..=28)).collect();
        days.sort_unstable();
        for (i, day) in days.into_iter().enumerate() {
            let text = if i == 0 && steering_months.contains(&m) {
                steering(&mut rng)
            } else {
                background(&mut rng)
            };
            out.push((format!("{year}-{month:02}-{day:02}"), text));
        }
    }
    for (q, &surge) in SURGE.iter().enumerate() {
        let mut quarter: Vec<(String, String)> = Vec::new();
        for i in 0..(surge + 9) {
            let month = q * 3 + i % 3 + 1;
            let day = rng.gen_range(1..=28);
            let text = if i < surge {
                steering(&mut rng)
            } else {
                background(&mut rng)
            };
            quarter.push((format!("1995-{month:02}-{day:02}"), text));
        }
        quarter.sort();
        out.extend(quarter);
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

pub fn corpus_jsonl() -> String {
    let mut s = String::new();
    for (i, (date, text)) in records().into_iter().enumerate() {
        let line = serde_json::json!({
            "id": format!("CMP{:05}", i + 1),
            "date": date,
            "product": "sedan",
            "text": text,
        });
        s.push_str(&line.to_string());
        s.push('\n');
    }
    s
}

pub fn population_csv() -> String {
    let mut s = String::from("period,population\n");
    for year in 1992..=1995 {
        for month in 1..=12 {
            s.push_str(&format!("{year}-{month:02},{POPULATION}\n"));
        }
    }
    s
}

/// `(file name, contents)` for every file of the demo project.
pub fn files() -> Vec<(&'static str, String)> {
    vec![
        ("proj.toml", CONFIG.to_string()),
        ("corpus.jsonl", corpus_jsonl()),
        ("population.csv", population_csv()),
        ("stoplist.txt", STOPLIST.to_string()),
        ("synonyms.csv", SYNONYMS.to_string()),
        ("custom_topics.csv", CUSTOM_TOPICS.to_string()),
    ]
}

pub fn write(dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for (name, contents) in files() {
        fs::write(dir.join(name), contents)?;
    }
    Ok(())
}
