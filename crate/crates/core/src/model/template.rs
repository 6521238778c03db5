//! Built-in landmark templates and their left/right mirror structure.

use super::ModelError;

/// A named landmark layout with a fixed point count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LandmarkTemplate {
    pub id: &'static str,
    pub points: usize,
}

const IBUG68: LandmarkTemplate = LandmarkTemplate {
    id: "ibug68",
    points: 68,
};
const IBUG51: LandmarkTemplate = LandmarkTemplate {
    id: "ibug51",
    points: 51,
};

/// Normalizes user spellings such as `iBUG-51` or `ibug_51`.
fn normalize_id(id: &str) -> String {
    id.chars()
        .filter(|c| !matches!(c, '-' | '_' | ' '))
        .flat_map(char::to_lowercase)
        .collect()
}

impl LandmarkTemplate {
    pub fn lookup(id: &str) -> Option<LandmarkTemplate> {
        match normalize_id(id).as_str() {
            "ibug68" => Some(IBUG68),
            "ibug51" => Some(IBUG51),
            _ => None,
        }
    }

    pub fn known_ids() -> &'static [&'static str] {
        &["ibug51", "ibug68"]
    }
}

/// Left/right correspondence of a landmark template.
///
/// `pairs` hold `(left, right)` indices in image orientation. Every point is
/// either on the midline or in exactly one pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MirrorTemplate {
    pub template_id: String,
    pub points: usize,
    pub midline: Vec<usize>,
    pub pairs: Vec<(usize, usize)>,
    /// Points whose distance normalizes the score (outer eye corners).
    pub interocular: (usize, usize),
}

// 68-point layout: jaw 0-16, brows 17-26, nose 27-35, eyes 36-47, mouth 48-67.
const IBUG68_MIDLINE: [usize; 10] = [8, 27, 28, 29, 30, 33, 51, 57, 62, 66];
const IBUG68_PAIRS: [(usize, usize); 29] = [
    (0, 16),
    (1, 15),
    (2, 14),
    (3, 13),
    (4, 12),
    (5, 11),
    (6, 10),
    (7, 9),
    (17, 26),
    (18, 25),
    (19, 24),
    (20, 23),
    (21, 22),
    (31, 35),
    (32, 34),
    (36, 45),
    (37, 44),
    (38, 43),
    (39, 42),
    (40, 47),
    (41, 46),
    (48, 54),
    (49, 53),
    (50, 52),
    (55, 59),
    (56, 58),
    (60, 64),
    (61, 63),
    (65, 67),
];

impl MirrorTemplate {
    pub fn new(
        template_id: impl Into<String>,
        points: usize,
        midline: Vec<usize>,
        pairs: Vec<(usize, usize)>,
        interocular: (usize, usize),
    ) -> Result<Self, ModelError> {
        let template_id = template_id.into();
        let mut seen = vec![0u8; points];
        let indices = midline
            .iter()
            .copied()
            .chain(pairs.iter().flat_map(|&(l, r)| [l, r]));
        for idx in indices {
            if idx >= points {
                return Err(ModelError::MirrorTemplate(format!(
                    "index {idx} out of range for {points} points"
                )));
            }
            seen[idx] += 1;
        }
        if let Some(idx) = seen.iter().position(|&n| n != 1) {
            return Err(ModelError::MirrorTemplate(format!(
                "point {idx} must appear exactly once across midline and pairs"
            )));
        }
        if interocular.0 >= points || interocular.1 >= points || interocular.0 == interocular.1 {
            return Err(ModelError::MirrorTemplate(
                "interocular pair must name two distinct points".into(),
            ));
        }
        Ok(Self {
            template_id,
            points,
            midline,
            pairs,
            interocular,
        })
    }

    /// Mirror structure of a built-in template.
    pub fn builtin(id: &str) -> Result<Self, ModelError> {
        let template =
            LandmarkTemplate::lookup(id).ok_or_else(|| ModelError::UnknownTemplate(id.into()))?;
        // the 51-point layout is the 68-point one without the jaw line
        let offset = 68 - template.points;
        let shift = |i: usize| i.checked_sub(offset);
        let midline = IBUG68_MIDLINE.iter().filter_map(|&i| shift(i)).collect();
        let pairs = IBUG68_PAIRS
            .iter()
            .filter_map(|&(l, r)| Some((shift(l)?, shift(r)?)))
            .collect();
        Self::new(
            template.id,
            template.points,
            midline,
            pairs,
            (36 - offset, 45 - offset),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_accepts_common_spellings() {
        assert_eq!(LandmarkTemplate::lookup("iBUG-51").unwrap().points, 51);
        assert_eq!(LandmarkTemplate::lookup("ibug_68").unwrap().points, 68);
        assert!(LandmarkTemplate::lookup("mediapipe").is_none());
    }

    #[test]
    fn builtin_mirror_templates_cover_every_point() {
        let t51 = MirrorTemplate::builtin("ibug51").unwrap();
        assert_eq!(t51.midline.len(), 9);
        assert_eq!(t51.pairs.len(), 21);
        assert_eq!(t51.interocular, (19, 28));
        let t68 = MirrorTemplate::builtin("ibug68").unwrap();
        assert_eq!(t68.midline.len() + 2 * t68.pairs.len(), 68);
    }

    #[test]
    fn rejects_overlapping_midline_and_pairs() {
        let err = MirrorTemplate::new("x", 3, vec![0, 1], vec![(1, 2)], (1, 2)).unwrap_err();
        assert!(matches!(err, ModelError::MirrorTemplate(_)));
    }
}
