//! Drive the coffee-shop site directly: observe, scroll, click, and watch
//! an off-screen element get rejected.
//!
//! ```text
//! cargo run -p flowbench --example simulated_site
//! ```

use flowbench::fixtures;
use flowbench::sim::{render_snapshot, EnvAction, ScrollDirection, Viewport};

fn click(element: &str) -> EnvAction {
    EnvAction::Click { element: element.into() }
}

fn main() {
    let mut site = fixtures::coffee_shop();
    let mut viewport = Viewport::new(Viewport::DEFAULT_HEIGHT);
    println!("{}", render_snapshot(&site, &viewport));

    for action in [
        click("menu-link"),
        click("cappuccino-link"),
        click("add-to-cart"),
        EnvAction::Scroll { direction: ScrollDirection::Down, amount: 30 },
        click("add-to-cart"),
    ] {
        let result = site.apply(&mut viewport, &action);
        println!("{:<10} ok={:<5} {}", action.name(), result.is_ok(), result.feedback());
    }
    println!("cart: {:?}", site.cart);
    println!("{}", render_snapshot(&site, &viewport));
}
