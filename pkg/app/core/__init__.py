# Core Configuration Package
