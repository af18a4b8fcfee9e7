//! Value-level helpers: uint16 range validation, mask-write arithmetic,
//! typed register conversions, and the alias map.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub const UINT16_MAX: i64 = 65535;

/// Accepts exactly the closed interval [0, 65535]; rejection happens before
/// any protocol frame is built.
pub fn validate_uint16(value: i64) -> Result<u16, i64> {
    if (0..=UINT16_MAX).contains(&value) {
        Ok(value as u16)
    } else {
        Err(value)
    }
}

/// Mask-write arithmetic: result = (current AND and) OR (or AND NOT and).
pub fn mask_write_result(current: u16, and_mask: u16, or_mask: u16) -> u16 {
    (current & and_mask) | (or_mask & !and_mask)
}

/// Register bank kinds addressable by tools and aliases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bank {
    Holding,
    Input,
    Coil,
    Discrete,
}

impl Bank {
    pub fn as_str(self) -> &'static str {
        match self {
            Bank::Holding => "holding",
            Bank::Input => "input",
            Bank::Coil => "coil",
            Bank::Discrete => "discrete",
        }
    }

    pub fn parse(s: &str) -> Option<Bank> {
        match s {
            "holding" => Some(Bank::Holding),
            "input" => Some(Bank::Input),
            "coil" => Some(Bank::Coil),
            "discrete" => Some(Bank::Discrete),
            _ => None,
        }
    }
}

/// Typed access datatypes. Multi-word types occupy two consecutive
/// registers in big-endian word order (high word at the lower address).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataType {
    Uint16,
    Int16,
    Uint32,
    Int32,
    Float32,
    Bool,
}

impl DataType {
    pub fn word_count(self) -> u16 {
        match self {
            DataType::Uint32 | DataType::Int32 | DataType::Float32 => 2,
            _ => 1,
        }
    }

    pub fn parse(s: &str) -> Option<DataType> {
        match s {
            "uint16" => Some(DataType::Uint16),
            "int16" => Some(DataType::Int16),
            "uint32" => Some(DataType::Uint32),
            "int32" => Some(DataType::Int32),
            "float32" => Some(DataType::Float32),
            "bool" => Some(DataType::Bool),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DataType::Uint16 => "uint16",
            DataType::Int16 => "int16",
            DataType::Uint32 => "uint32",
            DataType::Int32 => "int32",
            DataType::Float32 => "float32",
            DataType::Bool => "bool",
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TypedError {
    #[error("value {value} out of range for {datatype}")]
    Range { datatype: &'static str, value: String },
    #[error("value has the wrong JSON type for {datatype}")]
    Mismatch { datatype: &'static str },
}

/// Converts a JSON value to register words for a typed write.
pub fn encode_typed(datatype: DataType, value: &serde_json::Value) -> Result<Vec<u16>, TypedError> {
    let range = |v: &dyn std::fmt::Display| TypedError::Range {
        datatype: datatype.as_str(),
        value: v.to_string(),
    };
    let mismatch = || TypedError::Mismatch { datatype: datatype.as_str() };
    match datatype {
        DataType::Uint16 => {
            let v = value.as_i64().ok_or_else(mismatch)?;
            validate_uint16(v).map(|w| vec![w]).map_err(|v| range(&v))
        }
        DataType::Int16 => {
            let v = value.as_i64().ok_or_else(mismatch)?;
            if (i16::MIN as i64..=i16::MAX as i64).contains(&v) {
                Ok(vec![v as i16 as u16])
            } else {
                Err(range(&v))
            }
        }
        DataType::Uint32 => {
            let v = value.as_i64().ok_or_else(mismatch)?;
            if (0..=u32::MAX as i64).contains(&v) {
                let w = v as u32;
                Ok(vec![(w >> 16) as u16, w as u16])
            } else {
                Err(range(&v))
            }
        }
        DataType::Int32 => {
            let v = value.as_i64().ok_or_else(mismatch)?;
            if (i32::MIN as i64..=i32::MAX as i64).contains(&v) {
                let w = v as i32 as u32;
                Ok(vec![(w >> 16) as u16, w as u16])
            } else {
                Err(range(&v))
            }
        }
        DataType::Float32 => {
            let v = value.as_f64().ok_or_else(mismatch)?;
            let bits = (v as f32).to_bits();
            Ok(vec![(bits >> 16) as u16, bits as u16])
        }
        DataType::Bool => {
            let v = value.as_bool().ok_or_else(mismatch)?;
            Ok(vec![u16::from(v)])
        }
    }
}

/// Recomposes a typed value from register words.
pub fn decode_typed(datatype: DataType, words: &[u16]) -> serde_json::Value {
    match datatype {
        DataType::Uint16 => serde_json::json!(words[0]),
        DataType::Int16 => serde_json::json!(words[0] as i16),
        DataType::Uint32 => serde_json::json!(((words[0] as u32) << 16) | words[1] as u32),
        DataType::Int32 => serde_json::json!((((words[0] as u32) << 16) | words[1] as u32) as i32),
        DataType::Float32 => {
            serde_json::json!(f32::from_bits(((words[0] as u32) << 16) | words[1] as u32))
        }
        DataType::Bool => serde_json::json!(words[0] != 0),
    }
}

/// One alias definition: a named point in a bank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AliasEntry {
    pub bank: Bank,
    pub address: u16,
    pub datatype: DataType,
}

/// Alias name -> register mapping. The default map mirrors the mock plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AliasMap(pub BTreeMap<String, AliasEntry>);

impl AliasMap {
    /// The mock plant's named points.
    pub fn plant_default() -> AliasMap {
        let mut map = BTreeMap::new();
        let mut add = |name: &str, bank: Bank, address: u16, datatype: DataType| {
            map.insert(name.to_string(), AliasEntry { bank, address, datatype });
        };
        add("valve_position", Bank::Holding, 0, DataType::Uint16);
        add("heater_power", Bank::Holding, 1, DataType::Uint16);
        add("fan_speed", Bank::Holding, 2, DataType::Uint16);
        add("conveyor_speed", Bank::Holding, 3, DataType::Uint16);
        add("command_word", Bank::Holding, 4, DataType::Uint16);
        add("temperature", Bank::Input, 0, DataType::Uint16);
        add("pressure", Bank::Input, 1, DataType::Uint16);
        add("flow_rate", Bank::Input, 2, DataType::Uint16);
        add("tank_level", Bank::Input, 3, DataType::Uint16);
        add("vibration", Bank::Input, 4, DataType::Uint16);
        add("ph", Bank::Input, 5, DataType::Uint16);
        add("humidity", Bank::Input, 6, DataType::Uint16);
        add("motor_speed", Bank::Input, 7, DataType::Uint16);
        add("production_count", Bank::Input, 8, DataType::Uint16);
        add("pump_running", Bank::Coil, 0, DataType::Bool);
        add("emergency_stop", Bank::Coil, 1, DataType::Bool);
        AliasMap(map)
    }

    /// Loads a JSON alias file: `{name: {bank, address, datatype}}`.
    pub fn load(path: &Path) -> Result<AliasMap, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("read {}: {e}", path.display()))?;
        let map: BTreeMap<String, AliasEntry> =
            serde_json::from_str(&text).map_err(|e| format!("parse {}: {e}", path.display()))?;
        Ok(AliasMap(map))
    }

    pub fn get(&self, alias: &str) -> Option<&AliasEntry> {
        self.0.get(alias)
    }
}
