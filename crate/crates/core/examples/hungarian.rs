//! Minimum-cost assignment on rectangular matrices, with tie-breaking.

use rmot::assignment::{solve_max_score, solve_min_cost, CostMatrix};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let costs = CostMatrix::from_rows(&[[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]])?;
    let a = solve_min_cost(&costs);
    println!("3x3: pairs {:?}, total {}", a.pairs, a.total);

    let wide = CostMatrix::from_rows(&[[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]])?;
    let a = solve_min_cost(&wide);
    println!("2x3: pairs {:?}, total {}", a.pairs, a.total);

    // All pairings tie: the lexicographically smallest one is returned.
    let a = solve_min_cost(&CostMatrix::from_rows(&[[0.0; 3]; 3])?);
    println!("ties: pairs {:?}", a.pairs);

    let ious = CostMatrix::from_rows(&[[0.9, 0.1], [0.6, 0.5]])?;
    let a = solve_max_score(&ious);
    println!("max IoU: pairs {:?}, total {}", a.pairs, a.total);
    Ok(())
}
