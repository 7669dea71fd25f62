use forgeseek::classifier::Label;
use forgeseek::copymove::{segment_offsets, CopyMoveConfig, PatchMatchConfig};
use forgeseek::synth::{generate_items, CorpusSpec};

fn main() {
    let spec = CorpusSpec {
        n_pristine: 0,
        n_copymove: 2,
        n_splice: 0,
        rotation_prob: 1.0,
        seed: 6,
        ..Default::default()
    };
    let items = generate_items(&spec).unwrap();
    for it in items.iter().filter(|i| i.class == Label::Fake) {
        println!("== {} params: {}", it.id, it.params);
        let angle: f64 = it
            .params
            .split(';')
            .find_map(|kv| kv.strip_prefix("angle="))
            .unwrap()
            .parse()
            .unwrap();
        for theta in [angle, 360.0 - angle] {
            let (res, diag) = forgeseek::copymove::debug_run_at_angle(
                &it.image,
                theta,
                &PatchMatchConfig::default(),
                &CopyMoveConfig::default(),
            )
            .unwrap();
            println!(
                "  theta {theta}: fake={} candidates={} comps={:?} diag={}",
                res.is_fake, diag.candidate_count, diag.component_sizes, diag.notes
            );
            let _ = segment_offsets;
        }
    }
}
