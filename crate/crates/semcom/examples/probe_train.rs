use std::time::Instant;

use semcom::channel::{ChannelSpec, DEFAULT_PSNR_GRID_DB};
use semcom::data::LabeledImageSet;
use semcom::glvm::{self, DimSelector, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let epochs: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(2);
    let w_cls: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let w_kl: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let seed: u64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(7);
    let train = LabeledImageSet::load_idx(
        "data/mnist/train-images-idx3-ubyte",
        "data/mnist/train-labels-idx1-ubyte",
    )
    .unwrap();
    let test = LabeledImageSet::load_idx(
        "data/mnist/t10k-images-idx3-ubyte",
        "data/mnist/t10k-labels-idx1-ubyte",
    )
    .unwrap();
    println!("train {} test {}", train.len(), test.len());
    let channel = ChannelSpec::dynamic_uniform(&DEFAULT_PSNR_GRID_DB);
    let config = TrainConfig {
        epochs,
        w_cls,
        w_kl,
        seed,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let codec = glvm::train(&train, &channel, &config).unwrap();
    println!("trained {} epochs in {:.1}s", epochs, t0.elapsed().as_secs_f64());
    for (e, l) in codec.meta().history.iter().enumerate() {
        println!(
            "epoch {e}: recon {:.2} kl {:.2} cls {:.4} total {:.2}",
            l.recon, l.kl, l.cls, l.total
        );
    }
    let t1 = Instant::now();
    let clean = glvm::evaluate(&codec, &test, None, DimSelector::Fixed(64), 1).unwrap();
    println!("no channel d=64: acc {:.3}% mse {:.4}", clean.accuracy * 100.0, clean.recon_mse);
    for (psnr, d) in [
        (100.0, 4),
        (25.0, 4),
        (15.0, 4),
        (12.5, 4),
        (10.0, 4),
        (25.0, 3),
        (15.0, 3),
        (12.5, 3),
        (10.0, 3),
        (12.5, 2),
        (10.0, 2),
    ] {
        let r = glvm::evaluate(
            &codec,
            &test,
            Some(&ChannelSpec::static_db(psnr)),
            DimSelector::Fixed(d),
            1,
        )
        .unwrap();
        println!("psnr {psnr} d={d}: acc {:.3}%", r.accuracy * 100.0);
    }
    for d in [1usize, 2, 4, 8, 16, 32, 64] {
        let hi = glvm::evaluate(
            &codec,
            &test,
            Some(&ChannelSpec::static_db(100.0)),
            DimSelector::Fixed(d),
            1,
        )
        .unwrap();
        let lo = glvm::evaluate(
            &codec,
            &test,
            Some(&ChannelSpec::static_db(10.0)),
            DimSelector::Fixed(d),
            1,
        )
        .unwrap();
        println!(
            "sweep d={d}: psnr100 {:.3}% (mse {:.4}) psnr10 {:.3}%",
            hi.accuracy * 100.0,
            hi.recon_mse,
            lo.accuracy * 100.0
        );
    }
    let dynamic = ChannelSpec::dynamic_uniform(&DEFAULT_PSNR_GRID_DB);
    for (name, policy) in [
        ("spec-guess (25->4,15->3,floor2)", glvm::LatentPolicy::new(vec![(25.0, 4), (15.0, 3)], 2).unwrap()),
        ("floor3    (25->4,15->3,floor3)", glvm::LatentPolicy::new(vec![(25.0, 4), (15.0, 3)], 3).unwrap()),
        ("const3", glvm::LatentPolicy::new(vec![], 3).unwrap()),
    ] {
        let r = glvm::evaluate(&codec, &test, Some(&dynamic), DimSelector::Policy(&policy), 1).unwrap();
        println!(
            "dynamic {name}: acc {:.3}% mean_dim {:.2}",
            r.accuracy * 100.0,
            r.mean_latent_dim
        );
    }
    println!("eval time {:.1}s", t1.elapsed().as_secs_f64());
}
