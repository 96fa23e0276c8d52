use heterosim_core::workload::{enumerate_kernels, layer_macs_closed_form, preset, KernelClass, KernelId, PRESET_NAMES};
use heterosim_core::{Phase, TransformerConfig};
use proptest::prelude::*;

fn arb_config() -> impl Strategy<Value = TransformerConfig> {
    (1u64..=8, 1u64..=64, 1u64..=4, 1u64..=8, 0u64..=4, any::<bool>(), 1u64..=4).prop_flat_map(
        |(heads, dh, layers, n_mul, k, ft, r_max)| {
            let d = heads * dh * 2;
            let r = 1..=r_max.min(d - 1);
            (Just((heads, d, layers, n_mul * 16, k, ft)), r)
        },
    )
    .prop_map(|((h, d, layers, n, k, ft), r)| {
        let phase = if ft { Phase::FineTune } else { Phase::Inference };
        TransformerConfig::new(d, n, layers, h, r, k, phase)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn catalog_matches_closed_form(cfg in arb_config()) {
        let ks = enumerate_kernels(&cfg).unwrap();
        let total: u64 = ks.iter().map(|k| k.macs).sum();
        prop_assert_eq!(total, cfg.num_layers * layer_macs_closed_form(&cfg));
    }

    #[test]
    fn enumeration_is_deterministic(cfg in arb_config()) {
        prop_assert_eq!(enumerate_kernels(&cfg).unwrap(), enumerate_kernels(&cfg).unwrap());
    }

    #[test]
    fn classes_follow_kernel_kind(cfg in arb_config()) {
        for k in enumerate_kernels(&cfg).unwrap() {
            let want = match k.id {
                KernelId::Mha1 | KernelId::Mha4 | KernelId::Ff1 | KernelId::Ff2 => KernelClass::StaticWeight,
                KernelId::Mha2 | KernelId::LoraFwd | KernelId::LoraBwd => KernelClass::DynamicMM,
                KernelId::Mha3 | KernelId::L1 | KernelId::L2 => KernelClass::NonLinear,
            };
            prop_assert_eq!(k.class, want, "{}", k.label());
            prop_assert_eq!(k.lora_target.is_some(), matches!(k.id, KernelId::LoraFwd | KernelId::LoraBwd));
        }
    }

    #[test]
    fn backward_adapters_only_when_fine_tuning(cfg in arb_config()) {
        let ks = enumerate_kernels(&cfg).unwrap();
        let per_layer = |id| ks.iter().filter(|k| k.id == id && k.layer_index == 0).count() as u64;
        prop_assert_eq!(per_layer(KernelId::LoraFwd), cfg.k);
        let bwd = if cfg.phase == Phase::FineTune { cfg.k } else { 0 };
        prop_assert_eq!(per_layer(KernelId::LoraBwd), bwd);
    }
}

#[test]
fn presets_validate() {
    for name in PRESET_NAMES {
        let cfg = preset(name).unwrap();
        assert!(cfg.validate().is_ok(), "{name}");
        assert_eq!(cfg.d_ff, 4 * cfg.d_model);
    }
    assert!(preset("gpt-9").is_err());
}

#[test]
fn invalid_configs_name_their_field() {
    let base = TransformerConfig::new(64, 16, 2, 4, 8, 2, Phase::FineTune);
    let cases: [(TransformerConfig, &str); 5] = [
        (TransformerConfig { n: 0, ..base }, "workload.n"),
        (TransformerConfig { num_heads: 3, ..base }, "workload.num_heads"),
        (TransformerConfig { r: 64, ..base }, "workload.r"),
        (TransformerConfig { k: 5, ..base }, "workload.k"),
        (TransformerConfig { num_layers: 0, ..base }, "workload.num_layers"),
    ];
    for (cfg, field) in cases {
        let err = enumerate_kernels(&cfg).unwrap_err();
        assert!(err.to_string().contains(field), "{err}");
    }
}
