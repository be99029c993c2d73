//! Everything end to end through the command-line entry point:
//! synth -> smooth -> eval -> sweep, the same calls the `vidanon` binary makes.

use std::io;

fn main() {
    let dir = std::env::temp_dir().join("vidanon-pipeline");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let path = |name: &str| dir.join(name).to_string_lossy().into_owned();
    let (gt, dets, log, sm) = (
        path("gt.jsonl"),
        path("dets.jsonl"),
        path("drops.jsonl"),
        path("smoothed.jsonl"),
    );

    let steps: Vec<Vec<&str>> = vec![
        vec![
            "synth",
            "--seed",
            "9",
            "--frames",
            "2000",
            "--tracks",
            "8",
            "--drop-rate",
            "0.2",
            "--fp-rate",
            "0.1",
            "--out-gt",
            &gt,
            "--out-dets",
            &dets,
            "--out-log",
            &log,
        ],
        vec!["eval", "--dets", &dets, "--gt", &gt],
        vec!["smooth", "--in", &dets, "--out", &sm, "--k", "3"],
        vec!["eval", "--dets", &sm, "--gt", &gt],
        vec![
            "sweep",
            "--dets",
            &sm,
            "--gt",
            &gt,
            "--thresholds",
            "0.3:0.7:0.2",
        ],
    ];
    for args in steps {
        println!("$ vidanon {}", args.join(" "));
        let code = vidanon::cli::run(
            std::iter::once("vidanon").chain(args),
            &mut io::stdout(),
            &mut io::stderr(),
        );
        if code != 0 {
            std::process::exit(code);
        }
    }
}
