// SPDX-License-Identifier: Apache-2.0

//! Validates the citations in a drafted answer and prints the display text.
//!
//! ```text
//! cargo run --example grounding_check
//! ```

use std::collections::BTreeSet;

use groundpilot::grounding::{segment, strip_tokens, validate};

const DRAFT: &str = "Samsung Electronics closed 2.1% higher [ref:n001.p0]. \
Memory prices kept rising. [ref:n004.p1] \
Foreign investors were net buyers for a third day [ref:n007.p0][ref:x999.p0]. \
Analysts now see a stronger first half.";

fn main() {
    let evidence: BTreeSet<&str> = ["n001.p0", "n004.p1", "n007.p0"].into_iter().collect();
    for (i, s) in segment(DRAFT).iter().enumerate() {
        println!("{i}: {s}");
    }
    let report = validate(DRAFT, &evidence);
    println!(
        "\ngroundedness {}/{} = {:.2}, passed {}",
        report.grounded_sentences, report.total_sentences, report.groundedness, report.passed
    );
    println!("ungrounded sentences {:?}", report.ungrounded_sentence_indices);
    println!("unresolved ids {:?}", report.unresolved_tokens);
    println!("\ndisplay: {}", strip_tokens(DRAFT));
}
