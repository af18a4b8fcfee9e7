//! Topic names, filter validation, and wildcard matching.

/// Validates a subscription filter: `+` and `#` must occupy whole levels
/// and `#` may only terminate the filter.
pub fn validate_filter(filter: &str) -> Result<(), String> {
    if filter.is_empty() {
        return Err("filter must be non-empty".to_string());
    }
    let levels: Vec<&str> = filter.split('/').collect();
    for (i, level) in levels.iter().enumerate() {
        if level.contains('+') && *level != "+" {
            return Err(format!("`+` must occupy a whole level, found `{level}`"));
        }
        if level.contains('#') {
            if *level != "#" {
                return Err(format!("`#` must occupy a whole level, found `{level}`"));
            }
            if i != levels.len() - 1 {
                return Err("`#` is only allowed at the end of a filter".to_string());
            }
        }
    }
    Ok(())
}

/// MQTT wildcard semantics: `+` matches exactly one level, `#` matches the
/// remainder of the topic including the parent level itself.
pub fn topic_matches(filter: &str, topic: &str) -> bool {
    let filter_levels: Vec<&str> = filter.split('/').collect();
    let topic_levels: Vec<&str> = topic.split('/').collect();
    let mut i = 0;
    loop {
        match (filter_levels.get(i), topic_levels.get(i)) {
            (Some(&"#"), _) => return true,
            (Some(&"+"), Some(_)) => i += 1,
            (Some(f), Some(t)) if f == t => i += 1,
            (None, None) => return true,
            _ => return false,
        }
    }
}

/// Publish-side validation: publishes may not use wildcards, the topic must
/// be non-empty, and only QoS 0 and 1 are supported.
pub fn validate_publish(topic: &str, qos: i64) -> Result<(), (String, &'static str)> {
    if topic.is_empty() {
        return Err(("topic must be non-empty".to_string(), "empty_topic"));
    }
    if topic.contains('+') || topic.contains('#') {
        return Err((format!("publish topic `{topic}` may not contain wildcards"), "wildcard_topic"));
    }
    validate_qos(qos)
}

/// Subscribe-side validation: the filter may use wildcards but must be
/// syntactically valid.
pub fn validate_subscribe(filter: &str, qos: i64) -> Result<(), (String, &'static str)> {
    validate_filter(filter).map_err(|e| (e, "invalid_filter"))?;
    validate_qos(qos)
}

fn validate_qos(qos: i64) -> Result<(), (String, &'static str)> {
    match qos {
        0 | 1 => Ok(()),
        2 => Err(("qos 2 (exactly once) is not supported by this adapter; use 0 or 1".to_string(), "qos2_unsupported")),
        other => Err((format!("invalid qos {other}; must be 0 or 1"), "invalid_qos")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wildcard_hash_matches_deeper_topics() {
        assert!(topic_matches("sensors/#", "sensors/line1/temp"));
        assert!(topic_matches("sensors/#", "sensors"), "# also matches the parent level");
        assert!(!topic_matches("sensors/#", "actuators/line1"));
    }

    #[test]
    fn plus_matches_exactly_one_level() {
        assert!(topic_matches("a/+", "a/b"));
        assert!(!topic_matches("a/+", "a/b/c"));
        assert!(!topic_matches("a/+", "a"));
        assert!(topic_matches("+/b", "a/b"));
    }

    #[test]
    fn exact_match_without_wildcards() {
        assert!(topic_matches("a/b/c", "a/b/c"));
        assert!(!topic_matches("a/b/c", "a/b"));
        assert!(!topic_matches("a/b", "a/b/c"));
    }

    #[test]
    fn filter_validation_rules() {
        assert!(validate_filter("sensors/#").is_ok());
        assert!(validate_filter("+/+/x").is_ok());
        assert!(validate_filter("#").is_ok());
        assert!(validate_filter("a/#/b").is_err(), "# must be last");
        assert!(validate_filter("a/b+").is_err(), "+ must be a whole level");
        assert!(validate_filter("a/b#").is_err());
        assert!(validate_filter("").is_err());
    }

    #[test]
    fn publish_validation_matches_the_fault_scenarios() {
        assert_eq!(validate_publish("", 0).unwrap_err().0, "topic must be non-empty");
        assert!(validate_publish("ctl/valve", 5).unwrap_err().0.contains("invalid qos 5"));
        assert!(validate_publish("ctl/valve", 1).is_ok());
        assert!(validate_publish("ctl/+", 0).is_err(), "wildcards cannot be published to");
        let (msg, tag) = validate_publish("t", 2).unwrap_err();
        assert_eq!(tag, "qos2_unsupported");
        assert!(msg.contains("qos 2"), "qos 2 gets its own message: {msg}");
    }

    #[test]
    fn subscribe_validation_accepts_wildcards_but_rejects_bad_qos() {
        assert!(validate_subscribe("sensors/#", 0).is_ok());
        assert!(validate_subscribe("sensors/#", 5).is_err());
        assert!(validate_subscribe("a/#/b", 0).is_err());
    }

    /// Exhaustive comparison against an independent recursive matcher over a
    /// small alphabet.
    #[test]
    fn matches_brute_force_oracle_on_the_exhaustive_small_domain() {
        fn brute(filter: &[&str], topic: &[&str]) -> bool {
            match (filter.first(), topic.first()) {
                (Some(&"#"), _) => true,
                (Some(&"+"), Some(_)) => brute(&filter[1..], &topic[1..]),
                (Some(f), Some(t)) => f == t && brute(&filter[1..], &topic[1..]),
                (None, None) => true,
                _ => false,
            }
        }

        fn gen_paths(alphabet: &[&'static str], depth: usize) -> Vec<Vec<&'static str>> {
            let mut out: Vec<Vec<&'static str>> = vec![Vec::new()];
            for _ in 0..depth {
                let mut next = Vec::new();
                for path in &out {
                    if path.len() < depth {
                        for sym in alphabet {
                            let mut longer = path.clone();
                            longer.push(sym);
                            next.push(longer);
                        }
                    }
                }
                out.extend(next);
            }
            out.retain(|p| !p.is_empty());
            out.sort();
            out.dedup();
            out
        }

        let topics = gen_paths(&["a", "b"], 4);
        let mut filters = gen_paths(&["a", "b", "+"], 4);
        // also append #-terminated variants
        let mut hashed: Vec<Vec<&'static str>> = filters
            .iter()
            .map(|f| {
                let mut v = f.clone();
                v.push("#");
                v
            })
            .collect();
        hashed.push(vec!["#"]);
        filters.append(&mut hashed);

        let mut checked = 0usize;
        for filter in &filters {
            let filter_str = filter.join("/");
            for topic in &topics {
                let topic_str = topic.join("/");
                assert_eq!(
                    topic_matches(&filter_str, &topic_str),
                    brute(filter, topic),
                    "filter={filter_str} topic={topic_str}"
                );
                checked += 1;
            }
        }
        assert!(checked > 3000, "domain should be exhaustive, checked {checked}");
    }
}
