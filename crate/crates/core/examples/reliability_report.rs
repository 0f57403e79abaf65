//! Inter-rater agreement on a five-class confusion matrix.
//!
//!     cargo run -p vocalcode --example reliability_report

use vocalcode::reliability::{agreement_breakdown, cohen_kappa, exclude_class_pairs, ConfusionMatrix};
use vocalcode::AnnotationClass;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // Rows: coder A, columns: coder B, classes 1..5.
    let counts = vec![
        vec![2565, 2, 54, 131, 403],
        vec![2, 10, 0, 3, 13],
        vec![33, 0, 135, 14, 54],
        vec![41, 15, 4, 4694, 404],
        vec![139, 12, 12, 299, 266],
    ];
    let matrix = ConfusionMatrix::from_counts(AnnotationClass::ALL.to_vec(), counts)?;
    print!("{}", matrix.to_csv());

    println!("all classes:      {}", cohen_kappa(&matrix)?);
    let reduced = exclude_class_pairs(&matrix, AnnotationClass::Unassignable)?;
    println!("without class 5:  {}", cohen_kappa(&reduced)?);

    let b = agreement_breakdown(&matrix, AnnotationClass::Unassignable)?;
    println!(
        "consensual {} ({:.1}%), disagreements {} ({:.1}%), at least one class 5: {} ({:.1}%)",
        b.consensual, b.consensual_pct, b.disagreements, b.disagreements_pct, b.at_least_one_uncertain, b.at_least_one_uncertain_pct
    );
    for note in &b.notes {
        println!("note: {note}");
    }
    Ok(())
}
