//! Shipped preset catalog. The files live in `presets/` and are compiled in
//! so the binary runs from any directory.

/// Runnable presets: `(name, file)`.
pub const PRESETS: [(&str, &str); 5] = [
    ("fig3", "fig3.cfg"),
    ("fig5", "fig5.cfg"),
    ("fig7", "fig7.cfg"),
    ("fig8", "fig8.cfg"),
    ("fig10_hardswitch_20mhz", "fig10_hardswitch_20mhz.cfg"),
];

const FILES: [(&str, &str); 9] = [
    ("prototype_a.cfg", include_str!("../../presets/prototype_a.cfg")),
    ("prototype_b.cfg", include_str!("../../presets/prototype_b.cfg")),
    ("fig3.cfg", include_str!("../../presets/fig3.cfg")),
    ("fig5.cfg", include_str!("../../presets/fig5.cfg")),
    ("fig7.cfg", include_str!("../../presets/fig7.cfg")),
    ("fig8.cfg", include_str!("../../presets/fig8.cfg")),
    (
        "fig10_hardswitch_20mhz.cfg",
        include_str!("../../presets/fig10_hardswitch_20mhz.cfg"),
    ),
    (
        "tables/sct2450ke_cgd.csv",
        include_str!("../../presets/tables/sct2450ke_cgd.csv"),
    ),
    (
        "tables/sct2450ke_cds.csv",
        include_str!("../../presets/tables/sct2450ke_cds.csv"),
    ),
];

/// Contents of a catalog file by relative name.
pub fn catalog_file(name: &str) -> Option<&'static str> {
    FILES.iter().find(|(n, _)| *n == name).map(|(_, t)| *t)
}

/// Canonical preset name for `name`, accepting `fig10` as a short alias.
pub fn canonical(name: &str) -> Option<&'static str> {
    let name = if name == "fig10" {
        "fig10_hardswitch_20mhz"
    } else {
        name
    };
    PRESETS.iter().find(|(n, _)| *n == name).map(|(n, _)| *n)
}

pub fn preset_text(name: &str) -> Option<&'static str> {
    let name = canonical(name)?;
    let file = PRESETS.iter().find(|(n, _)| *n == name)?.1;
    catalog_file(file)
}

/// Name and one-line description of every preset.
pub fn list() -> Vec<(&'static str, String)> {
    PRESETS
        .iter()
        .map(|(name, file)| {
            let text = catalog_file(file).unwrap_or("");
            let description = text
                .lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == "description")
                .map(|(_, v)| v.trim().to_string())
                .unwrap_or_default();
            (*name, description)
        })
        .collect()
}
