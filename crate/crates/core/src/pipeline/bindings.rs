use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Everything a gesture can trigger. Actions are logged, never executed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Save,
    Print,
    Exit,
    Seek,
    PlayPause,
    Volume,
    Sleep,
    Shutdown,
    Restart,
    LockScreen,
    UnlockScreen,
}

impl Action {
    pub const ALL: [Action; 11] = [
        Action::Save,
        Action::Print,
        Action::Exit,
        Action::Seek,
        Action::PlayPause,
        Action::Volume,
        Action::Sleep,
        Action::Shutdown,
        Action::Restart,
        Action::LockScreen,
        Action::UnlockScreen,
    ];

    /// OS-level actions that do not depend on the foreground application.
    pub fn is_context_free(self) -> bool {
        matches!(
            self,
            Action::Sleep
                | Action::Shutdown
                | Action::Restart
                | Action::LockScreen
                | Action::UnlockScreen
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Save => "Save",
            Action::Print => "Print",
            Action::Exit => "Exit",
            Action::Seek => "Seek",
            Action::PlayPause => "PlayPause",
            Action::Volume => "Volume",
            Action::Sleep => "Sleep",
            Action::Shutdown => "Shutdown",
            Action::Restart => "Restart",
            Action::LockScreen => "LockScreen",
            Action::UnlockScreen => "UnlockScreen",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Action {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Action::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown action `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MacroBinding {
    ContextFree(Action),
    /// Application id → action.
    PerContext(BTreeMap<String, Action>),
}

/// What a classified gesture resolves to in the current context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved {
    pub action: Action,
    pub context: Option<String>,
}

impl MacroBinding {
    /// Context-free bindings ignore `context`. A per-context binding with no
    /// foreground application resolves only if it is an Exit binding, which
    /// becomes Shutdown; unknown applications resolve to nothing.
    pub fn resolve(&self, context: Option<&str>) -> Option<Resolved> {
        match (self, context) {
            (MacroBinding::ContextFree(action), _) => Some(Resolved {
                action: *action,
                context: None,
            }),
            (MacroBinding::PerContext(map), Some(app)) => map.get(app).map(|&action| Resolved {
                action,
                context: Some(app.to_string()),
            }),
            (MacroBinding::PerContext(map), None) => {
                map.values().any(|&a| a == Action::Exit).then_some(Resolved {
                    action: Action::Shutdown,
                    context: None,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BindingTable {
    classes: usize,
    garbage_class: usize,
    bindings: BTreeMap<usize, MacroBinding>,
}

impl BindingTable {
    /// Empty table for `classes` gesture classes; `garbage_class` never binds.
    pub fn new(classes: usize, garbage_class: usize) -> Result<Self> {
        if garbage_class >= classes {
            return Err(Error::Config(format!(
                "garbage class {garbage_class} outside {classes} classes"
            )));
        }
        Ok(Self {
            classes,
            garbage_class,
            bindings: BTreeMap::new(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn garbage_class(&self) -> usize {
        self.garbage_class
    }

    pub fn get(&self, class: usize) -> Option<&MacroBinding> {
        self.bindings.get(&class)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &MacroBinding)> {
        self.bindings.iter().map(|(c, b)| (*c, b))
    }

    pub fn lookup(&self, class: usize, context: Option<&str>) -> Option<Action> {
        self.get(class)?.resolve(context).map(|r| r.action)
    }

    pub fn validate(&self) -> Result<()> {
        if self.garbage_class >= self.classes {
            return Err(Error::Config("garbage class outside class range".into()));
        }
        for (&class, binding) in &self.bindings {
            if class >= self.classes || class == self.garbage_class {
                return Err(Error::Config(format!("class {class} cannot be bound")));
            }
            if let MacroBinding::PerContext(map) = binding {
                if let Some((app, a)) = map.iter().find(|(_, a)| a.is_context_free()) {
                    return Err(Error::Config(format!(
                        "{a} is context-free but bound under `{app}`"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bindings serialize")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let table: Self =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("bindings: {e}")))?;
        table.validate()?;
        Ok(table)
    }
}

/// Adds or replaces a binding. `context: None` binds a context-free action;
/// `Some(app)` sets the action for that application only.
pub fn register_binding(
    table: &mut BindingTable,
    class: usize,
    context: Option<&str>,
    action: Action,
) -> Result<()> {
    if class == table.garbage_class {
        return Err(Error::Config(format!(
            "class {class} is the garbage class and cannot be bound"
        )));
    }
    if class >= table.classes {
        return Err(Error::Config(format!(
            "class {class} outside {} classes",
            table.classes
        )));
    }
    let replaced = match context {
        None => {
            if !action.is_context_free() {
                return Err(Error::Config(format!("{action} needs an application context")));
            }
            table.bindings.insert(class, MacroBinding::ContextFree(action)).is_some()
        }
        Some(app) => {
            if action.is_context_free() {
                return Err(Error::Config(format!("{action} is context-free; drop the context")));
            }
            match table.bindings.get_mut(&class) {
                Some(MacroBinding::PerContext(map)) => map.insert(app.to_string(), action).is_some(),
                slot => {
                    let had = slot.is_some();
                    table.bindings.insert(
                        class,
                        MacroBinding::PerContext(BTreeMap::from([(app.to_string(), action)])),
                    );
                    had
                }
            }
        }
    };
    if replaced {
        log::debug!("class {class} rebound to {action} ({})", context.unwrap_or("any context"));
    }
    Ok(())
}

/// Word-processor and media-player bindings for the six-class gesture set,
/// with class 5 as garbage.
pub fn default_bindings() -> BindingTable {
    let mut t = BindingTable::new(6, 5).expect("valid class layout");
    let entries: [(usize, Option<&str>, Action); 8] = [
        (0, Some("msword"), Action::Save),
        (0, Some("vlc"), Action::PlayPause),
        (1, Some("msword"), Action::Print),
        (1, Some("vlc"), Action::Seek),
        (2, Some("msword"), Action::Exit),
        (2, Some("vlc"), Action::Exit),
        (3, None, Action::LockScreen),
        (4, None, Action::UnlockScreen),
    ];
    for (class, ctx, action) in entries {
        register_binding(&mut t, class, ctx, action).expect("default binding");
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bind_and_lookup() {
        let mut t = BindingTable::new(6, 5).unwrap();
        register_binding(&mut t, 0, Some("msword"), Action::Save).unwrap();
        assert_eq!(t.lookup(0, Some("msword")), Some(Action::Save));
        assert_eq!(t.lookup(0, Some("vlc")), None);
        assert_eq!(t.lookup(0, None), None);
    }

    #[test]
    fn garbage_and_out_of_range_classes_rejected() {
        let mut t = BindingTable::new(6, 5).unwrap();
        assert!(matches!(
            register_binding(&mut t, 5, None, Action::Sleep),
            Err(Error::Config(_))
        ));
        assert!(register_binding(&mut t, 6, None, Action::Sleep).is_err());
        assert!(BindingTable::new(6, 6).is_err());
    }

    #[test]
    fn rebinding_overwrites() {
        let mut t = BindingTable::new(6, 5).unwrap();
        register_binding(&mut t, 1, Some("msword"), Action::Save).unwrap();
        register_binding(&mut t, 1, Some("msword"), Action::Print).unwrap();
        assert_eq!(t.lookup(1, Some("msword")), Some(Action::Print));
        register_binding(&mut t, 1, None, Action::Sleep).unwrap();
        assert_eq!(t.lookup(1, Some("msword")), Some(Action::Sleep));
        register_binding(&mut t, 1, Some("vlc"), Action::Seek).unwrap();
        assert_eq!(t.lookup(1, Some("msword")), None);
    }

    #[test]
    fn action_kind_must_match_context() {
        let mut t = BindingTable::new(6, 5).unwrap();
        assert!(register_binding(&mut t, 0, None, Action::Save).is_err());
        assert!(register_binding(&mut t, 0, Some("vlc"), Action::Shutdown).is_err());
    }

    #[test]
    fn exit_without_context_becomes_shutdown() {
        let t = default_bindings();
        assert_eq!(t.lookup(2, None), Some(Action::Shutdown));
        assert_eq!(t.lookup(2, Some("msword")), Some(Action::Exit));
        assert_eq!(t.lookup(2, Some("notepad")), None);
        assert_eq!(t.lookup(0, None), None);
        assert_eq!(t.lookup(3, Some("vlc")), Some(Action::LockScreen));
        assert_eq!(t.lookup(5, None), None);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let t = default_bindings();
        assert_eq!(BindingTable::from_json(&t.to_json()).unwrap(), t);
        let bad = t.to_json().replacen("\"garbage_class\": 5", "\"garbage_class\": 0", 1);
        assert!(BindingTable::from_json(&bad).is_err());
    }

    #[test]
    fn action_names_parse() {
        for a in Action::ALL {
            assert_eq!(a.name().parse::<Action>().unwrap(), a);
        }
        assert!("Teleport".parse::<Action>().is_err());
    }
}
