macro_rules! example {
    ($name:ident, $file:literal) => {
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", $file));
        }
    };
}

example!(attack_synthetic, "attack_synthetic.rs");
example!(enhance_synthetic, "enhance_synthetic.rs");
example!(baseline_table, "baseline_table.rs");
example!(gradient_check, "gradient_check.rs");
example!(texture_io, "texture_io.rs");
example!(custom_scorer, "custom_scorer.rs");
example!(bridge_client, "bridge_client.rs");
example!(transformation_grid, "transformation_grid.rs");

#[test]
fn attack_synthetic_runs() {
    attack_synthetic::run_example().expect("attack example should run");
}

#[test]
fn enhance_synthetic_runs() {
    enhance_synthetic::run_example().expect("enhance example should run");
}

#[test]
fn baseline_table_runs() {
    baseline_table::run_example().expect("baseline example should run");
}

#[test]
fn gradient_check_runs() {
    gradient_check::run_example().expect("gradient example should run");
}

#[test]
fn texture_io_runs() {
    texture_io::run_example().expect("texture example should run");
}

#[test]
fn custom_scorer_runs() {
    custom_scorer::run_example().expect("custom scorer example should run");
}

#[test]
fn bridge_client_runs() {
    bridge_client::run_example().expect("bridge example should run");
}

#[test]
fn transformation_grid_runs() {
    transformation_grid::run_example().expect("grid example should run");
}
