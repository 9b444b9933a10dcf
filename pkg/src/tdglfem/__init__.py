"""Mixed finite elements for the time-dependent Ginzburg-Landau equations in 2D."""
