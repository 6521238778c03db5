/// Inputs to [`citation_block`].
#[derive(Debug, Clone, PartialEq)]
pub struct CitationConfig {
    pub toolkit_version: String,
    pub backend: String,
    pub morphable_model: Option<String>,
    pub camera_fov_deg: Option<f64>,
    pub landmark_template: Option<String>,
    pub used_local_coefficients: bool,
}

impl CitationConfig {
    pub fn new(toolkit_version: &str, backend: &str) -> Self {
        Self {
            toolkit_version: toolkit_version.into(),
            backend: backend.into(),
            morphable_model: None,
            camera_fov_deg: None,
            landmark_template: None,
            used_local_coefficients: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Reference {
    pub key: &'static str,
    pub text: &'static str,
}

const THREE_DI: Reference = Reference {
    key: "3DI",
    text: "Sariyanidi E, Zampella CJ, Schultz RT, Tunc B (2024). Inequality-Constrained 3D Morphable Face Model Fitting. IEEE Transactions on Pattern Analysis and Machine Intelligence, 46(2), 1305-1318. https://doi.org/10.1109/TPAMI.2023.3334948",
};
const BFM_2009: Reference = Reference {
    key: "BFM 2009",
    text: "Paysan P, Knothe R, Amberg B, Romdhani S, Vetter T (2009). A 3D Face Model for Pose and Illumination Invariant Face Recognition. In Proceedings of the IEEE International Conference on Advanced Video and Signal based Surveillance (AVSS), 296-301. https://doi.org/10.1109/AVSS.2009.58",
};
const IBUG_51: Reference = Reference {
    key: "iBUG-51",
    text: "Sariyanidi E, Zampella CJ, Schultz RT, Tunc B (2020). Can facial pose and expression be separated with weak perspective camera? In Proceedings of the IEEE/CVF Conference on Computer Vision and Pattern Recognition (CVPR), 7173-7182. https://doi.org/10.1109/CVPR42600.2020.00720",
};
const FACIAL_BASIS: Reference = Reference {
    key: "Facial Basis",
    text: "Sariyanidi E, Yankowitz L, Schultz RT, Herrington JD, Tunc B, Cohn J (2025). Beyond FACS: Data-driven facial expression dictionaries, with application to predicting autism. In Proceedings of the IEEE International Conference on Automatic Face and Gesture Recognition (FG), 19, 1-10. https://doi.org/10.1109/fg61629.2025.11099288",
};

fn squash(s: &str) -> String {
    s.chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .flat_map(|c| c.to_lowercase())
        .collect()
}

fn backend_reference(name: &str) -> Option<Reference> {
    (squash(name) == "3di").then_some(THREE_DI)
}

fn model_reference(name: &str) -> Option<Reference> {
    let s = squash(name);
    (s.starts_with("bfm") || s.contains("basel")).then_some(BFM_2009)
}

fn template_reference(name: &str) -> Option<Reference> {
    (squash(name) == "ibug51").then_some(IBUG_51)
}

struct Numbered(Vec<Reference>);

impl Numbered {
    /// Bracketed number of `r`, adding it on first use.
    fn cite(&mut self, r: Reference) -> String {
        let n = match self.0.iter().position(|x| *x == r) {
            Some(i) => i + 1,
            None => {
                self.0.push(r);
                self.0.len()
            }
        };
        format!(" [{n}]")
    }
}

/// Methods paragraph plus a reference list numbered from [1]. The
/// local-coefficient sentence and its reference appear only when
/// `used_local_coefficients` is set.
pub fn citation_block(cfg: &CitationConfig) -> String {
    let mut refs = Numbered(Vec::new());
    let backend = if cfg.backend.trim().is_empty() {
        "unspecified"
    } else {
        cfg.backend.trim()
    };
    let mut text = format!(
        "Behavioral signals were measured with behavio version {}.",
        cfg.toolkit_version
    );
    let backend_cite = backend_reference(backend).map(|r| refs.cite(r)).unwrap_or_default();
    text.push_str(&format!(" Faces were processed by the {backend} backend{backend_cite}"));
    if let Some(model) = &cfg.morphable_model {
        let cite = model_reference(model).map(|r| refs.cite(r)).unwrap_or_default();
        text.push_str(&format!(" using the {model} morphable model{cite}"));
    }
    text.push('.');
    if let Some(fov) = cfg.camera_fov_deg {
        text.push_str(&format!(" The camera field of view was {fov} degrees."));
    }
    if let Some(t) = &cfg.landmark_template {
        let cite = template_reference(t).map(|r| refs.cite(r)).unwrap_or_default();
        text.push_str(&format!(" Landmarks follow the {t} template{cite}."));
    }
    if cfg.used_local_coefficients {
        let cite = refs.cite(FACIAL_BASIS);
        text.push_str(&format!(" Local expression coefficients came from Facial Basis{cite}."));
    }
    if !refs.0.is_empty() {
        text.push_str("\n\nReferences\n");
        for (i, r) in refs.0.iter().enumerate() {
            text.push_str(&format!("[{}] {}\n", i + 1, r.text));
        }
    }
    text
}
