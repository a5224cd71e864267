macro_rules! example {
    ($name:ident) => {
        #[allow(dead_code)]
        mod $name {
            include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/", stringify!($name), ".rs"));
        }

        #[test]
        fn $name() {
            $name::run().expect(concat!(stringify!($name), " example"));
        }
    };
}

example!(compile_prov);
example!(generate_benchmark);
example!(split_audit);
example!(process_memory);
example!(retrieve_precedents);
example!(score_options);
example!(chat_policies);
example!(ablation_grid);
example!(end_to_end);
