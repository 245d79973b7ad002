use arabiq_core::{
    validate_quiz, ComplexityCategory, Description, ImageRecord, ImageSource, Modality,
    PromptCondition, ProviderProfile, Quiz, QuizOption, SkillTag,
};
use chrono::{TimeZone, Utc};
use proptest::prelude::*;

fn category() -> impl Strategy<Value = ComplexityCategory> {
    prop::sample::select(ComplexityCategory::ALL.to_vec())
}

fn condition() -> impl Strategy<Value = PromptCondition> {
    prop::sample::select(vec![PromptCondition::Prompted, PromptCondition::Bare])
}

prop_compose! {
    fn image()(n in any::<u64>(), url in any::<bool>(), cat in category(), secs in 0i64..4_000_000_000) -> ImageRecord {
        ImageRecord {
            id: arabiq_core::new_ulid(),
            source: if url { ImageSource::Url } else { ImageSource::Upload },
            locator: format!("images/{n}.jpg"),
            sha256: arabiq_core::sha256_hex(n.to_le_bytes()),
            complexity: cat,
            created_at: Utc.timestamp_opt(secs, 0).unwrap(),
        }
    }
}

prop_compose! {
    fn quiz()(
        labels in prop::collection::vec(prop::sample::select(vec!['a', 'b', 'c', 'd', 'e']), 0..6),
        texts in prop::collection::vec("[\u{0621}-\u{064A}\u{064B}-\u{0652} ]{0,12}", 6),
        correct in prop::sample::select(vec!['a', 'b', 'c', 'd', 'x']),
        ordinal in 0u32..5,
        stem in "[A-Za-z ?]{0,20}",
        skill in prop::sample::select(vec![SkillTag::Actions, SkillTag::Objects, SkillTag::Colors, SkillTag::Adjectives, SkillTag::Untagged]),
        declared in prop::option::of("[\u{0621}-\u{064A}]{1,6}"),
    ) -> Quiz {
        Quiz {
            id: "q".into(),
            image_id: "i".into(),
            description_id: "d".into(),
            model_id: "m".into(),
            ordinal,
            stem,
            options: labels.iter().zip(&texts).map(|(l, t)| QuizOption::new(*l, t)).collect(),
            declared_correct: correct,
            skill,
            declared_correct_text: declared,
        }
    }
}

proptest! {
    #[test]
    fn image_json_roundtrip(img in image()) {
        let s = serde_json::to_string(&img).unwrap();
        prop_assert_eq!(serde_json::from_str::<ImageRecord>(&s).unwrap(), img);
    }

    #[test]
    fn description_json_roundtrip(text in "[A-Za-z .\n]{1,60}", cond in condition(), secs in 0i64..4_000_000_000) {
        let d = Description {
            id: "d".into(),
            image_id: "i".into(),
            model_id: "gemma3".into(),
            condition: cond,
            text,
            created_at: Utc.timestamp_opt(secs, 0).unwrap(),
        };
        let s = serde_json::to_string(&d).unwrap();
        prop_assert_eq!(serde_json::from_str::<Description>(&s).unwrap(), d);
    }

    #[test]
    fn quiz_json_roundtrip_and_validation_is_pure(q in quiz()) {
        let s = serde_json::to_string(&q).unwrap();
        prop_assert_eq!(serde_json::from_str::<Quiz>(&s).unwrap(), q.clone());
        let first = validate_quiz(&q);
        prop_assert_eq!(validate_quiz(&q), first.clone());
        if first.is_ok() {
            let mut labels: Vec<char> = q.options.iter().map(|o| o.label).collect();
            labels.sort_unstable();
            prop_assert_eq!(labels, vec!['a', 'b', 'c', 'd']);
        }
    }

    #[test]
    fn profile_json_roundtrip(
        retries in 0u32..5,
        parallel in 1usize..16,
        timeout in 1_000u64..120_000,
        modality in prop::sample::select(vec![Modality::Vision, Modality::Text, Modality::Mock]),
        fixture in prop::option::of("[a-z]{1,8}\\.jsonl"),
    ) {
        let p = ProviderProfile {
            profile_id: "p".into(),
            endpoint_url: "https://api.example.test/v1".into(),
            model_name: "m".into(),
            modality,
            api_key_env: "KEY".into(),
            timeout_ms: timeout,
            max_retries: retries,
            max_parallel: parallel,
            fixture_file: fixture,
        };
        prop_assert!(p.validate().is_ok());
        let s = serde_json::to_string(&p).unwrap();
        prop_assert_eq!(serde_json::from_str::<ProviderProfile>(&s).unwrap(), p);
    }
}
