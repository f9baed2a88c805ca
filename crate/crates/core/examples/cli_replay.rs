//! Drives the command-line front end in process: run an experiment to a
//! CSV file, then replay it from the recorded config.

fn main() {
    let dir = std::env::temp_dir().join("qmetric-cli-example");
    std::fs::create_dir_all(&dir).expect("temp dir");
    let out = dir.join("growth.csv");
    let out_s = out.to_string_lossy().to_string();

    let code = qmetric::cli::main_with_args(["qmetric", "--out", &out_s, "lattice-growth", "--T", "2,1,1,1", "--n", "8"]);
    println!("run exit code {code}");
    print!("{}", std::fs::read_to_string(&out).expect("output"));

    let code = qmetric::cli::main_with_args(["qmetric", "replay", &out_s]);
    println!("replay exit code {code}");
}
