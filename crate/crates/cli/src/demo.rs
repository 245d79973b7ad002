//! Synthetic offline benchmark matching the evaluation set's shape: 211
//! images (87 simple, 56 moderate, 68 complex), four mock profiles, and
//! fixtures answering every request `gen` makes over them.

use std::fs;
use std::io::BufWriter;
use std::path::Path;

use anyhow::{Context, Result};
use arabiq_core::gateway::{describe_fixture_key, quiz_fixture_key, MockFixtures};
use arabiq_core::{sha256_hex, ComplexityCategory, PromptCondition, PromptTemplate};

pub const TIERS: [(ComplexityCategory, usize); 3] = [
    (ComplexityCategory::Simple, 87),
    (ComplexityCategory::Moderate, 56),
    (ComplexityCategory::Complex, 68),
];

/// (profile id, model name)
pub const VISION: [(&str, &str); 2] = [
    ("llama90-v", "llama-3.2-90b-vision"),
    ("gemma3", "gemma-3-27b"),
];
pub const QUIZ: [(&str, &str); 2] = [("llama70", "llama-3.3-70b"), ("fanar", "fanar-c")];

const FIXTURE_FILE: &str = "fixtures.jsonl";

/// A 32x32 solid-colour PNG, distinct for indices below 256.
fn image_png(i: usize) -> Result<Vec<u8>> {
    let (w, h) = (32u32, 32u32);
    let rgb = [(i * 37 % 256) as u8, (i * 91 % 256) as u8, 160];
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w, h);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header()?;
        let data: Vec<u8> = (0..w * h).flat_map(|_| rgb).collect();
        writer.write_image_data(&data)?;
    }
    Ok(out)
}

fn description(i: usize, profile: &str, condition: PromptCondition) -> String {
    match (profile, condition) {
        ("llama90-v", PromptCondition::Prompted) => format!(
            "In scene {i} a young boy sits at a wooden desk and writes in a notebook, with a blue book and a pencil beside him."
        ),
        ("llama90-v", PromptCondition::Bare) => format!("Scene {i}: a boy writing at a desk next to a blue book."),
        (_, PromptCondition::Prompted) => format!(
            "Scene {i} shows a child writing quietly at a desk; a blue book lies open near a small pencil."
        ),
        (_, PromptCondition::Bare) => format!("A child at a desk with a blue book (scene {i})."),
    }
}

fn quiz_reply(i: usize, profile: &str, n: u32) -> String {
    let what = if profile == "fanar" {
        "Which word describes what"
    } else {
        "What is"
    };
    let questions = [
        format!("- Question 1: {what} the boy doing in scene {i}? a) يَكْتُبُ b) يَجْلِسُ c) يَأْكُلُ d) يَشْرَبُ Correct answer: a) يَكْتُبُ"),
        "- Question 2: What color is the book? a) أَحْمَرُ b) أَزْرَقُ c) أَخْضَرُ d) أَصْفَرُ Correct answer: b) أَزْرَقُ".to_string(),
        "- Question 3: What is on the desk? a) قَلَمٌ b) كِتَابٌ c) كُرْسِيٌّ d) بَيْتٌ Correct answer: b) كِتَابٌ".to_string(),
    ];
    questions[..n as usize].join("\n")
}

fn providers_toml() -> String {
    let mut s = String::from(
        "# Mock profiles answering from fixtures.jsonl; swap in real endpoints to go live.\n",
    );
    for (id, model) in VISION.iter().chain(QUIZ.iter()) {
        s.push_str(&format!(
            "\n[{id}]\nmodality = \"mock\"\nmodel_name = \"{model}\"\nfixture_file = \"{FIXTURE_FILE}\"\nmax_parallel = 8\n"
        ));
    }
    s
}

/// Writes the benchmark under `out` and returns a one-line summary.
pub fn write(out: &Path) -> Result<String> {
    let images_dir = out.join("images");
    fs::create_dir_all(&images_dir)
        .with_context(|| format!("creating {}", images_dir.display()))?;
    let describe = PromptTemplate::default_describe();
    let quiz = PromptTemplate::default_quiz();
    let mut fixtures = MockFixtures::new();
    let mut manifest = String::from("locator,complexity,sha256\n");
    let mut i = 0;
    for (cat, count) in TIERS {
        for _ in 0..count {
            let bytes = image_png(i)?;
            let sha = sha256_hex(&bytes);
            let name = format!("images/{i:03}.png");
            fs::write(out.join(&name), &bytes)?;
            manifest.push_str(&format!("{name},{cat},{sha}\n"));
            for (profile, model) in VISION {
                for cond in [PromptCondition::Prompted, PromptCondition::Bare] {
                    let key = describe_fixture_key(&sha, model, cond, &describe)?;
                    fixtures.insert(key, description(i, profile, cond));
                }
            }
            // quiz sets come from the first vision profile's prompted description
            let chosen = description(i, VISION[0].0, PromptCondition::Prompted);
            for (profile, model) in QUIZ {
                for n in [2, 3] {
                    fixtures.insert(
                        quiz_fixture_key(&chosen, n, model, &quiz)?,
                        quiz_reply(i, profile, n),
                    );
                }
            }
            i += 1;
        }
    }
    fs::write(out.join("manifest.csv"), manifest)?;
    fs::write(out.join("providers.toml"), providers_toml())?;
    let f = fs::File::create(out.join(FIXTURE_FILE))?;
    fixtures.write_jsonl(BufWriter::new(f))?;
    Ok(format!(
        "wrote {i} images, manifest.csv, providers.toml and {} fixtures to {}",
        fixtures.len(),
        out.display()
    ))
}
