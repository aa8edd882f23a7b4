"""Configuration shared by the enf_tools command line and scripts."""
