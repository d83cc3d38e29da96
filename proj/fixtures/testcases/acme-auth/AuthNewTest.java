package org.acme.auth;

import static org.junit.Assert.assertEquals;

public class AuthNewTest {

    @Test
    public void rejectsSpecialCharacterPassword() {
        AuthResult result = Auth.login("user", "secure&#9pass");
        assertEquals("error_description", result.errorField());
        assertEquals(400, result.status());
    }

    @Test
    public void resolvesGraphResource() {
        assertEquals("https://graph.microsoft.com", Auth.defaultResource());
    }
}
