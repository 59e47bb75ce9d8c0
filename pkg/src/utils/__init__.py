# File formats, configuration and debug helpers
