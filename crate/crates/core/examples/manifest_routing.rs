// SPDX-License-Identifier: Apache-2.0

//! Loads the bundled manifest and prints where each component would run,
//! with external generation allowed and with it switched off.
//!
//! ```text
//! cargo run --example manifest_routing
//! ```

use groundpilot::demo;
use groundpilot::router::{select_path, RoutingPolicy};

fn main() {
    let manifest = demo::manifest();
    println!(
        "{} components, {} modules, {} sources, hash {}",
        manifest.components().len(),
        manifest.modules().len(),
        manifest.sources().len(),
        &manifest.content_hash()[..12]
    );
    println!("PII modules: {:?}", manifest.pii_modules());

    let open = RoutingPolicy { allow_external: true };
    let closed = RoutingPolicy { allow_external: false };
    println!("\n{:<22} {:<8} {:<9} {:<9}", "component", "class", "open", "closed");
    for c in manifest.components() {
        println!(
            "{:<22} {:<8} {:<9} {:<9}",
            c.id,
            format!("{:?}", c.sensitivity),
            format!("{:?}", select_path(c, &open)),
            format!("{:?}", select_path(c, &closed)),
        );
    }

    // a component inherits PII from any module, and a module from any source
    let portfolio = manifest.get_component("portfolio_analysis").expect("demo component");
    for m in &portfolio.module_ids {
        let module = manifest.get_module(m).expect("resolved on load");
        println!("portfolio_analysis <- {m} {:?} {:?}", module.sensitivity, module.data_sources);
    }
}
