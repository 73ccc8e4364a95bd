//! Dataset statistics over annotation files, or a Refer-KITTI tree.
//!
//! cargo run -p rmot --example dataset_stats -- [annotation-dir | --refer-kitti root]

use std::path::PathBuf;

use rmot::data_model::{compute_stats, load_annotation_dir};
use rmot::refer_kitti::{load_refer_kitti, KittiOptions};
use rmot::synthetic::{synthetic_dataset, FixtureSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let anns = match args.as_slice() {
        [flag, root] if flag == "--refer-kitti" => load_refer_kitti(&PathBuf::from(root), KittiOptions::default())?,
        [dir] => load_annotation_dir(dir)?,
        _ => synthetic_dataset(20, 0, &FixtureSpec::default()),
    };
    let stats = compute_stats(&anns);
    println!("{} sequences, {} expressions", stats.sequences, stats.expressions_count);
    println!("objects per expression: mean {:.2}, max {}", stats.mean_objects_per_expression, stats.max_objects_per_expression);
    println!("mean temporal ratio {:.3}", stats.mean_temporal_ratio);
    println!("temporal ratio histogram (0.1 bins): {:?}", stats.temporal_ratio_histogram.counts);
    Ok(())
}
