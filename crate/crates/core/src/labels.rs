//! Target construction for every discriminator scheme.
//!
//! Layouts, with `C` classes:
//!
//! | scheme       | length      | blocks                                   |
//! |--------------|-------------|------------------------------------------|
//! | omni         | `C + 2`     | class, `[real, fake]`                    |
//! | one-sided    | `C + 2`     | class, `[real, fake]` (only 2 non-zeros)  |
//! | imacgan      | `C + 1`     | class logits plus the extra fake class   |
//! | multidomain  | `C + D + 2` | class, domain one-hot, `[real, fake]`    |

use crate::error::{Error, Result};
use crate::loss::{OmniTarget, OmniTargetMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Omni,
    OneSided,
    ImAcGan,
    MultiDomain { num_domains: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabelScheme {
    pub num_classes: usize,
    pub kind: SchemeKind,
}

impl LabelScheme {
    pub fn new(num_classes: usize, kind: SchemeKind) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::param("a label scheme needs at least one class"));
        }
        if let SchemeKind::MultiDomain { num_domains } = kind {
            if num_domains == 0 {
                return Err(Error::param(
                    "a multidomain scheme needs at least one domain",
                ));
            }
        }
        Ok(LabelScheme { num_classes, kind })
    }

    pub fn omni(num_classes: usize) -> Result<Self> {
        Self::new(num_classes, SchemeKind::Omni)
    }

    pub fn one_sided(num_classes: usize) -> Result<Self> {
        Self::new(num_classes, SchemeKind::OneSided)
    }

    /// Length of the vector the discriminator head must emit.
    pub fn output_dim(&self) -> usize {
        let c = self.num_classes;
        match self.kind {
            SchemeKind::Omni | SchemeKind::OneSided => c + 2,
            SchemeKind::ImAcGan => c + 1,
            SchemeKind::MultiDomain { num_domains } => c + num_domains + 2,
        }
    }
}

/// Who a sample is labelled for.
///
/// The one-sided scheme needs the generator's class for fakes, so `Fake`
/// optionally carries it; other schemes ignore it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Real(usize),
    Fake(Option<usize>),
    Gen(usize),
}

fn check_class(class: usize, num_classes: usize) -> Result<()> {
    if class >= num_classes {
        return Err(Error::IndexOutOfRange {
            context: "class label",
            index: class,
            size: num_classes,
        });
    }
    Ok(())
}

fn wrong_scheme(expected: &str, got: SchemeKind) -> Error {
    Error::param(format!("expected a {expected} scheme, got {got:?}"))
}

fn omni_vec(c: usize, role: Role) -> Result<Vec<i8>> {
    let mut y = vec![-1i8; c + 2];
    match role {
        Role::Real(k) | Role::Gen(k) => {
            check_class(k, c)?;
            y[k] = 1;
            y[c] = 1;
        }
        Role::Fake(k) => {
            if let Some(k) = k {
                check_class(k, c)?;
            }
            y[c + 1] = 1;
        }
    }
    Ok(y)
}

/// Full-supervision targets: every class slot is labelled.
///
/// `Real(c)` and `Gen(c)` give `[-1, …, +1 at c, …, -1, +1, -1]`; `Fake`
/// gives all `-1` except `+1` in the last slot.
pub fn build_omni_target(scheme: &LabelScheme, role: Role) -> Result<OmniTarget> {
    if scheme.kind != SchemeKind::Omni {
        return Err(wrong_scheme("omni", scheme.kind));
    }
    OmniTarget::new(omni_vec(scheme.num_classes, role)?)
}

/// Projection-style targets: only the conditioning class slot and the
/// reality slot are labelled, everything else is ignored (`0`). The
/// fake-reality slot (index `C + 1`) is always `0`.
pub fn build_oneside_target(scheme: &LabelScheme, role: Role) -> Result<OmniTarget> {
    if scheme.kind != SchemeKind::OneSided {
        return Err(wrong_scheme("one-sided", scheme.kind));
    }
    let c = scheme.num_classes;
    let mut y = vec![0i8; c + 2];
    match role {
        Role::Real(k) | Role::Gen(k) => {
            check_class(k, c)?;
            y[k] = 1;
            y[c] = 1;
        }
        Role::Fake(Some(k)) => {
            check_class(k, c)?;
            y[k] = -1;
            y[c] = -1;
        }
        Role::Fake(None) => {
            return Err(Error::param(
                "one-sided fake targets need the generator's class",
            ))
        }
    }
    OmniTarget::new(y)
}

/// Class index for the `C + 1`-way auxiliary classifier: real and generator
/// roles use their class, fakes use the extra class `C`.
pub fn build_imacgan_class_target(num_classes: usize, role: Role) -> Result<usize> {
    match role {
        Role::Real(k) | Role::Gen(k) => {
            check_class(k, num_classes)?;
            Ok(k)
        }
        Role::Fake(k) => {
            if let Some(k) = k {
                check_class(k, num_classes)?;
            }
            Ok(num_classes)
        }
    }
}

/// Class, domain and reality blocks. Real and generator targets carry
/// three positives; fakes are negative everywhere but the last slot.
pub fn build_multidomain_target(
    scheme: &LabelScheme,
    role: Role,
    domain: usize,
) -> Result<OmniTarget> {
    let SchemeKind::MultiDomain { num_domains } = scheme.kind else {
        return Err(wrong_scheme("multidomain", scheme.kind));
    };
    let c = scheme.num_classes;
    if domain >= num_domains {
        return Err(Error::IndexOutOfRange {
            context: "domain",
            index: domain,
            size: num_domains,
        });
    }
    let mut y = vec![-1i8; c + num_domains + 2];
    match role {
        Role::Real(k) | Role::Gen(k) => {
            check_class(k, c)?;
            y[k] = 1;
            y[c + domain] = 1;
            y[c + num_domains] = 1;
        }
        Role::Fake(k) => {
            if let Some(k) = k {
                check_class(k, c)?;
            }
            y[c + num_domains + 1] = 1;
        }
    }
    OmniTarget::new(y)
}

/// A row-major `height × width` map of class indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    classes: Vec<usize>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, classes: Vec<usize>) -> Result<Self> {
        if height * width != classes.len() {
            return Err(Error::LengthMismatch {
                context: "LabelMap::new",
                left: height * width,
                right: classes.len(),
            });
        }
        Ok(LabelMap {
            height,
            width,
            classes,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn classes(&self) -> &[usize] {
        &self.classes
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.classes[i * self.width + j]
    }

    pub fn map_classes(&self, f: impl Fn(usize) -> usize) -> LabelMap {
        LabelMap {
            height: self.height,
            width: self.width,
            classes: self.classes.iter().map(|&c| f(c)).collect(),
        }
    }
}

/// Nearest-neighbour downsampling with floor index mapping:
/// `out[i][j] = in[⌊i·H_in/H_out⌋][⌊j·W_in/W_out⌋]`.
pub fn nn_downsample_labels(
    map: &LabelMap,
    out_height: usize,
    out_width: usize,
) -> Result<LabelMap> {
    if out_height == 0 || out_width == 0 {
        return Err(Error::param(
            "downsampled label map needs non-zero dimensions",
        ));
    }
    if out_height > map.height || out_width > map.width {
        return Err(Error::param(format!(
            "cannot downsample {}x{} to larger {}x{}",
            map.height, map.width, out_height, out_width
        )));
    }
    let mut classes = Vec::with_capacity(out_height * out_width);
    for i in 0..out_height {
        let src_i = i * map.height / out_height;
        for j in 0..out_width {
            let src_j = j * map.width / out_width;
            classes.push(map.get(src_i, src_j));
        }
    }
    LabelMap::new(out_height, out_width, classes)
}

/// Per-location role: the class comes from the label map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapRole {
    Real,
    Fake,
    Gen,
}

/// `[C + 2, H, W]` omni targets, one full-supervision vector per location.
pub fn build_perpixel_targets(
    map: &LabelMap,
    num_classes: usize,
    role: MapRole,
) -> Result<OmniTargetMap> {
    let (h, w) = (map.height, map.width);
    let ch = num_classes + 2;
    let plane = h * w;
    let mut labels = vec![0i8; ch * plane];
    for p in 0..plane {
        let class = map.classes[p];
        check_class(class, num_classes)?;
        let role = match role {
            MapRole::Real => Role::Real(class),
            MapRole::Gen => Role::Gen(class),
            MapRole::Fake => Role::Fake(None),
        };
        let y = omni_vec(num_classes, role)?;
        for (k, v) in y.into_iter().enumerate() {
            labels[k * plane + p] = v;
        }
    }
    OmniTargetMap::new([ch, h, w], labels)
}
