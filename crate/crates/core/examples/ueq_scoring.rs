//! Scores questionnaire responses per scale and places the means against
//! benchmark intervals.

use hatewatch::metrics::ueq::read_responses_csv;
use hatewatch::metrics::{benchmark_all, ueq_score, BenchmarkConfig, ItemMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut rows = read_responses_csv(std::fs::File::open(fixtures.join("ueq_10.csv"))?, 26)?;
    // the file holds raw 1..7 answers
    rows.iter_mut().flatten().for_each(|v| *v -= 4.0);

    let result = ueq_score(&rows, &ItemMap::standard())?;
    println!("kept {} responses, discarded {}", result.n_kept, result.n_discarded);
    let bench: BenchmarkConfig = serde_json::from_str(&std::fs::read_to_string(fixtures.join("ueq_benchmark.example.json"))?)?;
    let categories = benchmark_all(&result, &bench)?;
    for (scale, stat) in &result.scales {
        let cat = categories.get(scale).map(|c| format!("{c:?}")).unwrap_or_default();
        println!("{:<15} mean {:>6.3}  sd {:.3}  {cat}", format!("{scale:?}"), stat.mean, stat.sd);
    }
    println!("pragmatic {:.3}  hedonic {:.3}", result.pragmatic_quality, result.hedonic_quality);
    Ok(())
}
