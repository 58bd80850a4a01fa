use std::fmt::Write;

use super::{EvalReport, GoalRow};

fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut out = String::new();
    let line = |cells: Vec<&str>, out: &mut String| {
        let mut s = String::new();
        for (i, (c, w)) in cells.iter().zip(&widths).enumerate() {
            if i == 0 {
                let _ = write!(s, "{c:<w$}");
            } else {
                let _ = write!(s, "  {c:>w$}");
            }
        }
        out.push_str(s.trim_end());
        out.push('\n');
    };
    line(header.to_vec(), &mut out);
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    line(rule.iter().map(String::as_str).collect(), &mut out);
    for r in rows {
        line(r.iter().map(String::as_str).collect(), &mut out);
    }
    out
}

fn goal_table(title: &str, rows: &[GoalRow]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.key.clone(), r.count.to_string(), format!("{:.2}", r.success_pct)])
        .collect();
    table(&[title, "Count", "Success %"], &body)
}

/// One row per report: model, split, goal type, horizon, reward, turns.
pub fn render_reports(reports: &[EvalReport]) -> String {
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.model.clone(),
                r.split.clone(),
                r.goal_type.to_string(),
                r.horizon.to_string(),
                r.episodes.to_string(),
                format!("{:.3}", r.mean_reward),
                format!("{:.2}", r.mean_turns),
            ]
        })
        .collect();
    table(&["Model", "Split", "Goal", "n", "Episodes", "Reward", "Turns"], &rows)
}

/// Summary line plus per-goal, achievability and repeat sections.
pub fn render_report(r: &EvalReport) -> String {
    let mut out = render_reports(std::slice::from_ref(r));
    if !r.config.is_empty() {
        out.push('\n');
        for (k, v) in &r.config {
            let _ = writeln!(out, "{k} = {v}");
        }
    }
    if !r.verbs.is_empty() {
        out.push('\n');
        out.push_str(&goal_table("Verb", &r.verbs));
    }
    if !r.emotes.is_empty() {
        out.push('\n');
        out.push_str(&goal_table("Emote", &r.emotes));
    }
    if let Some(a) = &r.achievability {
        out.push('\n');
        let rows = vec![
            vec!["1-step achievable".into(), a.achievable.episodes.to_string(), format!("{:.3}", a.achievable.mean_reward)],
            vec!["unachievable".into(), a.unachievable.episodes.to_string(), format!("{:.3}", a.unachievable.mean_reward)],
        ];
        out.push_str(&table(&["Class", "Episodes", "Reward"], &rows));
    }
    let _ = write!(
        out,
        "\nrepeats: {:.3} of episodes, {:.3} of utterances\n",
        r.repeats.episode_fraction, r.repeats.utterance_fraction
    );
    out
}
