//! Configs shipped with the binary, one suite per figure.

pub const BUNDLED: &[(&str, &str)] = &[
    ("fig2", include_str!("../configs/fig2.json")),
    ("fig3", include_str!("../configs/fig3.json")),
    ("fig4", include_str!("../configs/fig4.json")),
    ("fig5", include_str!("../configs/fig5.json")),
    ("fig6", include_str!("../configs/fig6.json")),
    ("fig7", include_str!("../configs/fig7.json")),
    ("fig8", include_str!("../configs/fig8.json")),
];

/// Looks up `name`, with or without the `.json` extension.
pub fn bundled(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".json").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == name).map(|(_, text)| *text)
}
