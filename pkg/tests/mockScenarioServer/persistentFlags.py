# Modules imported only once, this is effectively a singleton


class PersistentFlags:

    def __init__(self):
        self.server_error = False
        self.short_answer = False
        self.bad_request = False

    def set_server_error(self):
        self.server_error = True

    def clear_server_error(self):
        self.server_error = False

    def get_server_error(self):
        return self.server_error

    def set_short_answer(self):
        self.short_answer = True

    def clear_short_answer(self):
        self.short_answer = False

    def get_short_answer(self):
        return self.short_answer

    def set_bad_request(self):
        self.bad_request = True

    def clear_bad_request(self):
        self.bad_request = False

    def get_bad_request(self):
        return self.bad_request


persistent_flags = PersistentFlags()
