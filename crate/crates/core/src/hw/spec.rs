use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::HwError;

pub const HW_SCHEMA_VERSION: u32 = 1;

/// Accelerator envelope the search and cost model work against.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HardwareSpec {
    pub schema_version: u32,
    pub name: String,
    pub axi_width_bits: u32,
    pub data_width_bits: u32,
    /// Elements of one `T_n x T_m` working set that fit on chip.
    pub onchip_capacity_elems: u64,
    pub ddr_banks: u32,
    pub num_kernels: u32,
    pub frequency_hz: f64,
    /// Elements per cycle of one kernel's non-linear unit.
    pub lop: u32,
    /// Named resource limits for pluggable resource predicates.
    #[serde(default)]
    pub resource_budget: BTreeMap<String, u64>,
}

impl HardwareSpec {
    /// VU9P-class board: 512-bit AXI, 16-bit data, four DDR banks, eight
    /// kernels at 200 MHz with 16-wide non-linear units.
    ///
    /// On-chip capacity is set to the largest published working set,
    /// `212 * 3072` elements.
    pub fn vu9p() -> Self {
        Self {
            schema_version: HW_SCHEMA_VERSION,
            name: "vu9p".into(),
            axi_width_bits: 512,
            data_width_bits: 16,
            onchip_capacity_elems: 212 * 3072,
            ddr_banks: 4,
            num_kernels: 8,
            frequency_hz: 200e6,
            lop: 16,
            resource_budget: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), HwError> {
        if self.schema_version != HW_SCHEMA_VERSION {
            return Err(HwError::SchemaVersion { found: self.schema_version, expected: HW_SCHEMA_VERSION });
        }
        let counts = [
            ("axi_width_bits", u64::from(self.axi_width_bits)),
            ("data_width_bits", u64::from(self.data_width_bits)),
            ("onchip_capacity_elems", self.onchip_capacity_elems),
            ("ddr_banks", u64::from(self.ddr_banks)),
            ("num_kernels", u64::from(self.num_kernels)),
            ("lop", u64::from(self.lop)),
        ];
        for (field, v) in counts {
            if v == 0 {
                return Err(HwError::Invalid { field, reason: "must be at least 1".into() });
            }
        }
        if u64::from(self.axi_width_bits) < 2 * u64::from(self.data_width_bits) {
            return Err(HwError::AxiTooNarrow { axi: self.axi_width_bits, dw: self.data_width_bits });
        }
        if !(self.frequency_hz.is_finite() && self.frequency_hz > 0.0) {
            return Err(HwError::Invalid { field: "frequency_hz", reason: "must be positive".into() });
        }
        Ok(())
    }

    /// Compute units per PE, fixed by the AXI word.
    pub fn pm(&self) -> u64 {
        super::compute_pm(self.axi_width_bits, self.data_width_bits).expect("validated spec")
    }
}

pub fn parse_hardware(doc: &str) -> Result<HardwareSpec, HwError> {
    let hw: HardwareSpec = serde_json::from_str(doc)?;
    hw.validate()?;
    Ok(hw)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_round_trips() {
        let hw = HardwareSpec::vu9p();
        hw.validate().unwrap();
        let doc = serde_json::to_string(&hw).unwrap();
        assert_eq!(parse_hardware(&doc).unwrap(), hw);
        assert_eq!(hw.pm(), 16);
    }

    #[test]
    fn rejects_narrow_axi_and_zero_banks() {
        let mut hw = HardwareSpec::vu9p();
        hw.axi_width_bits = 16;
        assert!(matches!(hw.validate(), Err(HwError::AxiTooNarrow { .. })));
        let mut hw = HardwareSpec::vu9p();
        hw.ddr_banks = 0;
        assert!(hw.validate().is_err());
        assert!(parse_hardware("{\"name\": 3}").is_err());
    }
}
