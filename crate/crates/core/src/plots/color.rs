use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rgb(pub u8, pub u8, pub u8);

impl Rgb {
    pub const NEUTRAL: Rgb = Rgb(255, 255, 255);
    pub const RED: Rgb = Rgb(255, 13, 87);
    pub const BLUE: Rgb = Rgb(30, 136, 229);
    pub const GREY: Rgb = Rgb(153, 153, 153);

    pub fn hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.0, self.1, self.2)
    }

    /// Linear blend, `t = 0` gives `self`.
    pub fn mix(self, other: Rgb, t: f64) -> Rgb {
        let t = t.clamp(0.0, 1.0);
        let ch = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
        Rgb(ch(self.0, other.0), ch(self.1, other.1), ch(self.2, other.2))
    }

    pub fn is_red_hued(self) -> bool {
        self.0 > self.2
    }

    pub fn is_blue_hued(self) -> bool {
        self.2 > self.0
    }
}

/// Colour conventions for signed contributions.
///
/// `Paper` follows each figure's own caption: waterfall bars are blue when
/// positive and red when negative, while heatmap cells are red when
/// positive. `Unified` uses red-positive everywhere.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Palette {
    #[default]
    Paper,
    Unified,
}

impl Palette {
    pub fn waterfall_color(self, contribution: f64) -> Rgb {
        let (pos, neg) = match self {
            Palette::Paper => (Rgb::BLUE, Rgb::RED),
            Palette::Unified => (Rgb::RED, Rgb::BLUE),
        };
        if contribution > 0.0 {
            pos
        } else if contribution < 0.0 {
            neg
        } else {
            Rgb::GREY
        }
    }
}

/// Diverging scale anchored at 0: white at 0, towards red for positive and
/// blue for negative values, saturating at `|v| = max_abs`. Any nonzero
/// value gets at least one step of tint so its sign stays visible.
pub fn diverging(v: f64, max_abs: f64) -> Rgb {
    if v == 0.0 || max_abs.is_nan() || max_abs <= 0.0 {
        return Rgb::NEUTRAL;
    }
    let t = (v.abs() / max_abs).clamp(1.0 / 255.0, 1.0);
    if v > 0.0 {
        Rgb::NEUTRAL.mix(Rgb::RED, t)
    } else {
        Rgb::NEUTRAL.mix(Rgb::BLUE, t)
    }
}

/// Low-to-high feature value ramp used by the beeswarm (blue → red).
pub fn feature_ramp(t: f64) -> Rgb {
    Rgb::BLUE.mix(Rgb::RED, t)
}
