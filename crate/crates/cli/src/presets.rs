//! Embedded experiment presets: one-command reproductions of the standard
//! result sweeps. Each is a plain config file; `fedsched presets NAME`
//! prints one to copy and tweak.

pub const PRESETS: [(&str, &str); 4] = [
    ("fig4a", include_str!("../presets/fig4a.toml")),
    ("fig4d", include_str!("../presets/fig4d.toml")),
    ("fig5b", include_str!("../presets/fig5b.toml")),
    ("fig7a", include_str!("../presets/fig7a.toml")),
];

pub fn lookup(name: &str) -> Option<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
}

/// First comment line of a preset, as its listing description.
pub fn describe(text: &str) -> &str {
    text.lines()
        .find_map(|l| l.strip_prefix("# "))
        .unwrap_or("")
}
