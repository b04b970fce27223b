pub mod exploration;
pub mod path_oracle;
