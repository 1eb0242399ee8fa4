//! Questionnaire registry: scales, items, sub-scales, and the Big Five factor map.
//!
//! The on-disk format is TOML. See `fixtures/registry.toml` for the shipped
//! registry and `README.md` for the schema.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Number of items on the Big Five input instrument.
pub const BIG_FIVE_ITEMS: usize = 20;
/// Factor labels of the Big Five instrument, in canonical order.
pub const BIG_FIVE_FACTORS: [&str; 5] = ["O", "C", "E", "A", "N"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleRole {
    /// Big Five inventory fed to predictors.
    Input,
    /// Scale whose items are predicted.
    Target,
    /// Instructed-response items only; never predicted or correlated.
    Check,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub item_id: String,
    pub scale_id: String,
    /// Prompt-ready wording.
    pub text: String,
    pub reverse_scored: bool,
    pub response_min: i32,
    pub response_max: i32,
    /// Expected response on an instructed-response item.
    pub attention_check: Option<i32>,
}

impl ItemSpec {
    pub fn contains(&self, value: i32) -> bool {
        (self.response_min..=self.response_max).contains(&value)
    }

    pub fn levels(&self) -> i32 {
        self.response_max - self.response_min + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubscaleSpec {
    pub id: String,
    pub label: String,
    pub items: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleSpec {
    pub scale_id: String,
    pub name: String,
    pub role: ScaleRole,
    pub items: Vec<ItemSpec>,
    pub subscales: Vec<SubscaleSpec>,
    /// item_id -> factor label (O/C/E/A/N). Only set on the input scale.
    pub factor_map: Option<BTreeMap<String, String>>,
}

impl ScaleSpec {
    pub fn item(&self, item_id: &str) -> Option<&ItemSpec> {
        self.items.iter().find(|i| i.item_id == item_id)
    }

    pub fn item_ids(&self) -> Vec<String> {
        self.items.iter().map(|i| i.item_id.clone()).collect()
    }

    pub fn subscale_ids(&self) -> Vec<String> {
        self.subscales.iter().map(|s| s.id.clone()).collect()
    }
}

/// Ordered sub-scale identifiers split by role.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubscaleLayout {
    pub input: Vec<String>,
    pub target: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Registry {
    scales: Vec<ScaleSpec>,
    input_scale: String,
}

// ---- raw TOML schema -------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRegistry {
    input_scale: String,
    scales: Vec<RawScale>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScale {
    id: String,
    name: String,
    role: ScaleRole,
    response_min: Option<i32>,
    response_max: Option<i32>,
    items: Vec<RawItem>,
    #[serde(default)]
    subscales: Vec<SubscaleSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawItem {
    id: String,
    text: String,
    #[serde(default)]
    reverse: bool,
    response_min: Option<i32>,
    response_max: Option<i32>,
    attention_check: Option<i32>,
    factor: Option<String>,
}

impl Registry {
    pub fn from_toml_str(text: &str) -> Result<Self, DataError> {
        let raw: RawRegistry =
            toml::from_str(text).map_err(|e| DataError::Registry(e.to_string()))?;
        let mut scales = Vec::with_capacity(raw.scales.len());
        for rs in raw.scales {
            let mut factor_map = BTreeMap::new();
            let mut items = Vec::with_capacity(rs.items.len());
            for ri in rs.items {
                let response_min = ri.response_min.or(rs.response_min).ok_or_else(|| {
                    DataError::Registry(format!("item {} has no response_min", ri.id))
                })?;
                let response_max = ri.response_max.or(rs.response_max).ok_or_else(|| {
                    DataError::Registry(format!("item {} has no response_max", ri.id))
                })?;
                if let Some(f) = ri.factor {
                    factor_map.insert(ri.id.clone(), f);
                }
                items.push(ItemSpec {
                    item_id: ri.id,
                    scale_id: rs.id.clone(),
                    text: ri.text,
                    reverse_scored: ri.reverse,
                    response_min,
                    response_max,
                    attention_check: ri.attention_check,
                });
            }
            scales.push(ScaleSpec {
                scale_id: rs.id,
                name: rs.name,
                role: rs.role,
                items,
                subscales: rs.subscales,
                factor_map: (!factor_map.is_empty()).then_some(factor_map),
            });
        }
        Self::new(scales, raw.input_scale)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, DataError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| DataError::Registry(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    /// The registry shipped with the crate: a Mini-IPIP-style 20 item Big Five
    /// stand-in, nine target scales (21 sub-scales), and two instructed-response items.
    pub fn builtin() -> Self {
        Self::from_toml_str(include_str!("../../fixtures/registry.toml"))
            .expect("builtin registry is valid")
    }

    pub fn new(scales: Vec<ScaleSpec>, input_scale: String) -> Result<Self, DataError> {
        let reg = Self { scales, input_scale };
        reg.validate()?;
        Ok(reg)
    }

    fn validate(&self) -> Result<(), DataError> {
        let bad = |msg: String| Err(DataError::Registry(msg));
        let mut all_items = HashSet::new();
        let mut all_subscales = HashSet::new();
        let mut scale_ids = HashSet::new();
        for scale in &self.scales {
            if !scale_ids.insert(scale.scale_id.as_str()) {
                return bad(format!("duplicate scale id {}", scale.scale_id));
            }
            for item in &scale.items {
                if item.response_min >= item.response_max {
                    return bad(format!(
                        "item {}: response_min must be below response_max",
                        item.item_id
                    ));
                }
                if let Some(expected) = item.attention_check {
                    if !item.contains(expected) {
                        return bad(format!(
                            "item {}: attention_check {expected} outside [{}, {}]",
                            item.item_id, item.response_min, item.response_max
                        ));
                    }
                }
                if !all_items.insert(item.item_id.as_str()) {
                    return bad(format!("duplicate item id {}", item.item_id));
                }
            }
            let mut covered = HashSet::new();
            for sub in &scale.subscales {
                if !all_subscales.insert(sub.id.as_str()) {
                    return bad(format!("duplicate subscale id {}", sub.id));
                }
                if sub.items.is_empty() {
                    return bad(format!("subscale {} has no items", sub.id));
                }
                for member in &sub.items {
                    if scale.item(member).is_none() {
                        return bad(format!(
                            "subscale {} references unknown item {member}",
                            sub.id
                        ));
                    }
                    covered.insert(member.as_str());
                }
            }
            if scale.role != ScaleRole::Check {
                if let Some(orphan) = scale.items.iter().find(|i| !covered.contains(i.item_id.as_str())) {
                    return bad(format!("item {} belongs to no subscale", orphan.item_id));
                }
            }
        }

        let input = self
            .scale(&self.input_scale)
            .ok_or_else(|| DataError::Registry(format!("input scale {} not declared", self.input_scale)))?;
        if input.role != ScaleRole::Input {
            return bad(format!("input scale {} must have role = \"input\"", input.scale_id));
        }
        if self.scales.iter().filter(|s| s.role == ScaleRole::Input).count() != 1 {
            return bad("exactly one scale may have role = \"input\"".into());
        }
        if input.items.len() != BIG_FIVE_ITEMS {
            return bad(format!(
                "input scale must have {BIG_FIVE_ITEMS} items, found {}",
                input.items.len()
            ));
        }
        let factor_map = input
            .factor_map
            .as_ref()
            .ok_or_else(|| DataError::Registry("input scale needs a factor per item".into()))?;
        let mut per_factor: HashMap<&str, usize> = HashMap::new();
        for item in &input.items {
            let f = factor_map.get(&item.item_id).ok_or_else(|| {
                DataError::Registry(format!("input item {} has no factor", item.item_id))
            })?;
            if !BIG_FIVE_FACTORS.contains(&f.as_str()) {
                return bad(format!("unknown factor label {f} on {}", item.item_id));
            }
            *per_factor.entry(f).or_default() += 1;
        }
        if BIG_FIVE_FACTORS.iter().any(|f| per_factor.get(f) != Some(&4)) {
            return bad("input scale must have exactly 4 items on each of O/C/E/A/N".into());
        }
        Ok(())
    }

    pub fn scales(&self) -> &[ScaleSpec] {
        &self.scales
    }

    pub fn scale(&self, scale_id: &str) -> Option<&ScaleSpec> {
        self.scales.iter().find(|s| s.scale_id == scale_id)
    }

    pub fn input(&self) -> &ScaleSpec {
        self.scale(&self.input_scale).expect("validated")
    }

    pub fn targets(&self) -> impl Iterator<Item = &ScaleSpec> {
        self.scales.iter().filter(|s| s.role == ScaleRole::Target)
    }

    pub fn item(&self, item_id: &str) -> Option<&ItemSpec> {
        self.scales.iter().find_map(|s| s.item(item_id))
    }

    pub fn factor_map(&self) -> &BTreeMap<String, String> {
        self.input().factor_map.as_ref().expect("validated")
    }

    pub fn attention_items(&self) -> impl Iterator<Item = &ItemSpec> {
        self.scales
            .iter()
            .flat_map(|s| s.items.iter())
            .filter(|i| i.attention_check.is_some())
    }

    pub fn target_item_ids(&self) -> Vec<String> {
        self.targets().flat_map(|s| s.item_ids()).collect()
    }

    pub fn layout(&self) -> SubscaleLayout {
        SubscaleLayout {
            input: self.input().subscale_ids(),
            target: self.targets().flat_map(|s| s.subscale_ids()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_registry_shape() {
        let reg = Registry::builtin();
        assert_eq!(reg.input().items.len(), 20);
        assert_eq!(reg.input().subscales.len(), 5);
        let layout = reg.layout();
        assert_eq!(layout.input.len(), 5);
        assert_eq!(layout.target.len(), 21);
        for abbrev in [
            "PSS", "Coping_P", "Coping_N", "Trait_Anxiety", "Self_Criticism", "Self_Isolation",
            "Over_ID", "Self_Kindness", "Self_Humanity", "Self_Mindfulness", "Self_Compassion",
            "PR_Tenacity", "PR_Strength", "PR_Optimism", "Pros_Anx", "Inhib_Anx", "ERQ_R",
            "ERQ_S", "Risk_Unrel", "Obj_Risk", "FT_Persp",
        ] {
            assert!(layout.target.iter().any(|t| t == abbrev), "{abbrev} missing");
        }
        assert!(reg.attention_items().count() >= 1);
        assert_eq!(reg.targets().count(), 9);
    }

    fn minimal(extra: &str) -> String {
        let mut s = String::from("input_scale = \"BF\"\n[[scales]]\nid = \"BF\"\nname = \"bf\"\nrole = \"input\"\nresponse_min = 1\nresponse_max = 5\n");
        for (i, f) in BIG_FIVE_FACTORS.iter().cycle().take(20).enumerate() {
            s.push_str(&format!(
                "[[scales.items]]\nid = \"B{i:02}\"\ntext = \"t\"\nfactor = \"{f}\"\n"
            ));
        }
        for (fi, f) in BIG_FIVE_FACTORS.iter().enumerate() {
            let members: Vec<String> = (0..20).filter(|i| i % 5 == fi).map(|i| format!("\"B{i:02}\"")).collect();
            s.push_str(&format!(
                "[[scales.subscales]]\nid = \"{f}\"\nlabel = \"{f}\"\nitems = [{}]\n",
                members.join(",")
            ));
        }
        s.push_str(extra);
        s
    }

    #[test]
    fn minimal_registry_parses() {
        let reg = Registry::from_toml_str(&minimal("")).unwrap();
        assert_eq!(reg.layout().target.len(), 0);
    }

    #[test]
    fn rejects_inverted_bounds() {
        let extra = "[[scales]]\nid = \"T\"\nname = \"t\"\nrole = \"target\"\nresponse_min = 7\nresponse_max = 1\n[[scales.items]]\nid = \"T1\"\ntext = \"x\"\n[[scales.subscales]]\nid = \"S\"\nlabel = \"S\"\nitems = [\"T1\"]\n";
        let err = Registry::from_toml_str(&minimal(extra)).unwrap_err();
        assert!(err.to_string().contains("response_min"), "{err}");
    }

    #[test]
    fn rejects_orphan_item_and_unknown_member() {
        let orphan = "[[scales]]\nid = \"T\"\nname = \"t\"\nrole = \"target\"\nresponse_min = 1\nresponse_max = 7\n[[scales.items]]\nid = \"T1\"\ntext = \"x\"\n[[scales.items]]\nid = \"T2\"\ntext = \"y\"\n[[scales.subscales]]\nid = \"S\"\nlabel = \"S\"\nitems = [\"T1\"]\n";
        assert!(Registry::from_toml_str(&minimal(orphan)).unwrap_err().to_string().contains("no subscale"));
        let unknown = orphan.replace("items = [\"T1\"]", "items = [\"T1\", \"T2\", \"T9\"]");
        assert!(Registry::from_toml_str(&minimal(&unknown)).unwrap_err().to_string().contains("unknown item"));
    }

    #[test]
    fn rejects_attention_check_out_of_bounds() {
        let extra = "[[scales]]\nid = \"ATT\"\nname = \"a\"\nrole = \"check\"\nresponse_min = 1\nresponse_max = 5\n[[scales.items]]\nid = \"AC1\"\ntext = \"pick 4\"\nattention_check = 6\n";
        assert!(Registry::from_toml_str(&minimal(extra)).is_err());
    }
}
