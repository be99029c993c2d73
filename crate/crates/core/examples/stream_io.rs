//! Reading and writing detection streams (JSON lines, one record per frame).

use vidanon::streams::{parse_stream, stream_to_bytes};

const INPUT: &str = r#"{"meta":{"frame_count":6}}
{"frame":0,"boxes":[{"x":10,"y":12,"w":40,"h":48,"score":0.91}]}
{"frame":2,"boxes":[{"x":14,"y":12,"w":40,"h":48,"score":0.88}]}
{"frame":2,"boxes":[{"x":300,"y":80,"w":52,"h":60,"score":0.42}]}
{"frame":4,"boxes":[]}
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let parsed = parse_stream(INPUT.as_bytes())?;
    let s = &parsed.stream;
    println!(
        "{} frames, {} boxes, {} duplicate record(s) merged",
        s.frame_count(),
        s.box_count(),
        parsed.merged_duplicates
    );
    for f in 0..s.frame_count() {
        println!("  frame {f}: {} box(es)", s.boxes_at(f).len());
    }

    let confident = s.filter_min_score(0.5);
    println!("\nafter --min-score 0.5:");
    print!("{}", String::from_utf8(stream_to_bytes(&confident))?);

    match parse_stream(b"{\"frame\":0,\"boxes\":[{\"x\":1,\"y\":1,\"w\":-3,\"h\":2}]}\n") {
        Ok(_) => unreachable!(),
        Err(e) => println!("\nrejected: {e}"),
    }
    Ok(())
}
