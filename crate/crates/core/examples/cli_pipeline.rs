// The command-line tool driven in-process: generate a target map, score
// it with the transport loss, then evaluate it as a prediction.

use std::fs;

use papm::cli;

pub fn run_example() -> std::io::Result<()> {
    let dir = std::env::temp_dir().join(format!("papm-cli-example-{}", std::process::id()));
    let (pred_dir, gt_dir) = (dir.join("pred"), dir.join("gt"));
    fs::create_dir_all(&pred_dir)?;
    fs::create_dir_all(&gt_dir)?;
    let points = gt_dir.join("scene.json");
    fs::write(
        &points,
        r#"{"image_width": 24, "image_height": 16, "points": [[5.5, 4.5], [17.0, 11.0]]}"#,
    )?;
    let map = pred_dir.join("scene.papm");
    let (points, map) = (points.display().to_string(), map.display().to_string());

    let steps: [Vec<&str>; 3] = [
        vec!["gen-papm", "--points", &points, "--out", &map],
        vec!["ot-loss", "--points", &points, "--pred", &map],
        vec![
            "eval",
            "--pred-dir",
            pred_dir.to_str().unwrap_or_default(),
            "--gt-dir",
            gt_dir.to_str().unwrap_or_default(),
            "--game",
            "2",
            "--localize",
            "--radius",
            "4",
        ],
    ];
    for args in steps {
        println!("$ papm {}", args.join(" "));
        let status = cli::run(std::iter::once("papm").chain(args.iter().copied()));
        if status != cli::EXIT_OK {
            return Err(std::io::Error::other(format!("{} exited with {status}", args[0])));
        }
    }
    fs::remove_dir_all(&dir)
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
