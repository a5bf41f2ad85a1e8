# Utils package for shared functionality across the toolkit packages
